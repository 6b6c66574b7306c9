"""
Data module for the MOHSA toolkit.
CIFAR-10 binary batches, synthetic blob images and augmentation.
"""

from .cifar import Dataset, decode_records, load_cifar10, read_cifar10_file, RECORD_BYTES
from .synthetic import synthetic_dataset, class_templates
from .augment import augment_batch, random_crop, random_flip

__all__ = [
    'Dataset',
    'decode_records',
    'load_cifar10',
    'read_cifar10_file',
    'RECORD_BYTES',
    'synthetic_dataset',
    'class_templates',
    'augment_batch',
    'random_crop',
    'random_flip',
]
