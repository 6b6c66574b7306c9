"""
Synthetic class-conditional image data.
Each class owns a fixed template of a few Gaussian blobs; samples are the
template plus pixel noise, so the classes separate cleanly at high SNR.
"""

import numpy as np

from config.settings import ConfigurationError
from src.core import Rng
from src.data.cifar import CHANNELS, Dataset

BLOBS_PER_CLASS = 3


def class_templates(classes: int, image_size: int, template_seed: int = 0) -> np.ndarray:
    """[classes, 3, S, S] unit-variance patterns, identical for every dataset drawn with the same template_seed."""
    rng = Rng(template_seed).fork(classes * 1000 + image_size)
    yy, xx = np.meshgrid(np.arange(image_size), np.arange(image_size), indexing="ij")
    templates = np.zeros((classes, CHANNELS, image_size, image_size))
    for c in range(classes):
        centers = rng.uniform((BLOBS_PER_CLASS, 2)) * image_size
        widths = 1.0 + rng.uniform(BLOBS_PER_CLASS) * image_size / 6.0
        colors = rng.normal((BLOBS_PER_CLASS, CHANNELS))
        for (cy, cx), width, color in zip(centers, widths, colors):
            blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width ** 2))
            templates[c] += color[:, None, None] * blob
        templates[c] = (templates[c] - templates[c].mean()) / (templates[c].std() + 1e-12)
    return templates


def synthetic_dataset(seed: int, n: int, classes: int, image_size: int = 32, snr: float = 4.0,
                      template_seed: int = 0) -> Dataset:
    """n images with balanced labels in a seed-determined order, pixels clipped to [0, 1]."""
    if n < 1 or classes < 2:
        raise ConfigurationError(f"synthetic data needs n >= 1 and classes >= 2, got n={n}, classes={classes}")
    if not snr > 0:
        raise ConfigurationError(f"snr must be positive, got {snr}")
    rng = Rng(seed)
    templates = class_templates(classes, image_size, template_seed)
    labels = (np.arange(n) % classes)[rng.fork(0).permutation(n)]
    noise = rng.fork(1).normal((n, CHANNELS, image_size, image_size))
    images = 0.5 + 0.1 * (templates[labels] + noise / snr)
    return Dataset(
        images=np.clip(images, 0.0, 1.0).astype(np.float32),
        labels=labels.astype(np.int64),
        num_classes=classes,
        name=f"synthetic-{seed}",
    )
