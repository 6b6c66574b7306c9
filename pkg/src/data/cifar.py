"""
CIFAR-10 binary-format reader.

Each record is 3073 bytes: one label byte, then 1024 red, 1024 green and
1024 blue bytes, each plane a row-major 32x32 image.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from config.settings import DataError
from src.utils.file_manager import FormatError

IMAGE_SIZE = 32
CHANNELS = 3
RECORD_BYTES = 1 + CHANNELS * IMAGE_SIZE * IMAGE_SIZE
NUM_CLASSES = 10
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)
SUBDIR = "cifar-10-batches-bin"


@dataclass
class Dataset:
    """Images [N, 3, H, W] float32 in [0, 1] and integer labels [N]."""
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, limit: int) -> "Dataset":
        """First `limit` samples; 0 keeps everything."""
        if not limit or limit >= len(self):
            return self
        return Dataset(self.images[:limit], self.labels[:limit], self.num_classes, self.name)

    def batches(self, batch_size: int, order: np.ndarray = None):
        """Yield (images, labels) in `order` (default: stored order)."""
        order = np.arange(len(self)) if order is None else order
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            yield self.images[idx], self.labels[idx]


def decode_records(raw: bytes, source: str = "<bytes>") -> Dataset:
    """Parse concatenated records; pixel byte v becomes v / 255."""
    if len(raw) % RECORD_BYTES:
        raise FormatError(
            f"{source}: length {len(raw)} is not a multiple of the {RECORD_BYTES}-byte CIFAR-10 record")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() >= NUM_CLASSES:
        bad = int(np.argmax(labels >= NUM_CLASSES))
        raise DataError(f"{source}: record {bad} has label {labels[bad]}, above {NUM_CLASSES - 1}")
    images = records[:, 1:].reshape(-1, CHANNELS, IMAGE_SIZE, IMAGE_SIZE).astype(np.float32) / np.float32(255.0)
    return Dataset(images, labels, NUM_CLASSES, source)


def read_cifar10_file(path) -> Dataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read CIFAR-10 file {path}: {e}")
    return decode_records(raw, str(path))


def _locate(directory: Path, names) -> List[Path]:
    for base in (directory, directory / SUBDIR):
        paths = [base / n for n in names]
        if all(p.exists() for p in paths):
            return paths
    raise DataError(f"{directory} does not contain the CIFAR-10 binary batches ({', '.join(names)})")


def load_cifar10(directory, split: str = "train") -> Dataset:
    """data_batch_1..5.bin for "train", test_batch.bin for "test"/"val"."""
    if split not in ("train", "test", "val"):
        raise DataError(f"Unknown CIFAR-10 split {split!r}")
    names = TRAIN_FILES if split == "train" else TEST_FILES
    parts = [read_cifar10_file(p) for p in _locate(Path(directory), names)]
    return Dataset(
        images=np.concatenate([p.images for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        num_classes=NUM_CLASSES,
        name=f"cifar10-{split}",
    )
