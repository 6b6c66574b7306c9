"""
Training-time augmentation: random crop from a zero-padded image and random
horizontal flip, both drawn from the run's Rng.
"""

import numpy as np

from src.core import Rng

CROP_PADDING = 4


def random_crop(images: np.ndarray, rng: Rng, padding: int = CROP_PADDING) -> np.ndarray:
    """Per-image crop of the original size from a `padding`-pixel zero border."""
    if padding <= 0:
        return images
    b, _, h, w = images.shape
    padded = np.pad(images, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    offsets = rng.integers(0, 2 * padding + 1, (b, 2))
    out = np.empty_like(images)
    for i, (dy, dx) in enumerate(offsets):
        out[i] = padded[i, :, dy:dy + h, dx:dx + w]
    return out


def random_flip(images: np.ndarray, rng: Rng) -> np.ndarray:
    flip = rng.uniform(images.shape[0]) < 0.5
    out = images.copy()
    out[flip] = out[flip, :, :, ::-1]
    return out


def augment_batch(images: np.ndarray, rng: Rng, padding: int = CROP_PADDING) -> np.ndarray:
    return random_flip(random_crop(images, rng, padding), rng)
