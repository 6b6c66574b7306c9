"""
Tests for the CIFAR-10 reader, synthetic data and augmentation.
"""

import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import ConfigurationError, DataError
from src.core import Rng
from src.data import (
    RECORD_BYTES,
    Dataset,
    augment_batch,
    class_templates,
    decode_records,
    load_cifar10,
    random_crop,
    random_flip,
    synthetic_dataset,
)
from src.utils.file_manager import FormatError


def make_records(labels):
    """CIFAR-10 records whose pixel byte at plane offset i is (label + i) % 256."""
    out = bytearray()
    for label in labels:
        out.append(label)
        out.extend((label + i) % 256 for i in range(RECORD_BYTES - 1))
    return bytes(out)


class TestCifarRecords(unittest.TestCase):

    def test_decode(self):
        data = decode_records(make_records([3, 7]))
        self.assertEqual(data.images.shape, (2, 3, 32, 32))
        self.assertEqual(data.images.dtype, np.float32)
        assert_array_equal(data.labels, [3, 7])
        self.assertAlmostEqual(float(data.images[0, 0, 0, 0]), 3 / 255, places=6)
        # green plane starts 1024 bytes in; row 1 col 2 is offset 32 + 2
        self.assertAlmostEqual(float(data.images[1, 1, 1, 2]), ((7 + 1024 + 34) % 256) / 255, places=6)

    def test_bad_length(self):
        with self.assertRaises(FormatError) as ctx:
            decode_records(make_records([1])[:-1])
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_label_above_nine(self):
        with self.assertRaises(DataError):
            decode_records(make_records([2, 10]))

    def test_load_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp) / "cifar-10-batches-bin"
            root.mkdir()
            (root / "test_batch.bin").write_bytes(make_records([0, 1, 2]))
            data = load_cifar10(tmp, "test")
            self.assertEqual(len(data), 3)
            self.assertEqual(data.num_classes, 10)
            self.assertEqual(len(load_cifar10(root, "val")), 3)
            with self.assertRaises(DataError):
                load_cifar10(tmp, "train")
            with self.assertRaises(DataError):
                load_cifar10(tmp, "holdout")


class TestSynthetic(unittest.TestCase):

    def test_deterministic(self):
        a = synthetic_dataset(1, 30, 3, image_size=8)
        b = synthetic_dataset(1, 30, 3, image_size=8)
        assert_array_equal(a.images, b.images)
        assert_array_equal(a.labels, b.labels)
        c = synthetic_dataset(2, 30, 3, image_size=8)
        self.assertFalse(np.array_equal(a.images, c.images))

    def test_balanced_and_bounded(self):
        data = synthetic_dataset(0, 40, 4, image_size=8)
        self.assertEqual(np.bincount(data.labels).tolist(), [10, 10, 10, 10])
        self.assertEqual(data.images.shape, (40, 3, 8, 8))
        self.assertEqual(data.images.dtype, np.float32)
        self.assertGreaterEqual(float(data.images.min()), 0.0)
        self.assertLessEqual(float(data.images.max()), 1.0)

    def test_templates_shared_across_seeds(self):
        assert_array_equal(class_templates(3, 8), class_templates(3, 8))
        self.assertFalse(np.array_equal(class_templates(3, 8, 0), class_templates(3, 8, 1)))

    def test_classes_separate_at_high_snr(self):
        """Nearest class mean of one draw classifies another draw."""
        train = synthetic_dataset(0, 60, 3, image_size=8, snr=8.0)
        val = synthetic_dataset(1, 30, 3, image_size=8, snr=8.0)
        means = np.stack([train.images[train.labels == c].mean(axis=0) for c in range(3)]).reshape(3, -1)
        dists = ((val.images.reshape(30, 1, -1) - means[None]) ** 2).sum(axis=-1)
        self.assertGreater(float(np.mean(dists.argmin(axis=1) == val.labels)), 0.9)

    def test_invalid_arguments(self):
        with self.assertRaises(ConfigurationError):
            synthetic_dataset(0, 0, 3)
        with self.assertRaises(ConfigurationError):
            synthetic_dataset(0, 10, 3, snr=0.0)


class TestDataset(unittest.TestCase):

    def test_subset_and_batches(self):
        data = synthetic_dataset(0, 10, 2, image_size=8)
        self.assertIs(data.subset(0), data)
        self.assertEqual(len(data.subset(4)), 4)
        sizes = [len(y) for _, y in data.batches(4)]
        self.assertEqual(sizes, [4, 4, 2])
        order = np.arange(10)[::-1]
        _, first = next(data.batches(3, order))
        assert_array_equal(first, data.labels[[9, 8, 7]])

    def test_empty_dataset_has_no_batches(self):
        empty = Dataset(np.zeros((0, 3, 8, 8), np.float32), np.zeros(0, np.int64), 3)
        self.assertEqual(len(empty), 0)
        self.assertEqual(list(empty.batches(4)), [])


class TestAugment(unittest.TestCase):

    def setUp(self):
        self.images = synthetic_dataset(0, 6, 2, image_size=8).images

    def test_shapes_and_determinism(self):
        a = augment_batch(self.images, Rng(1))
        b = augment_batch(self.images, Rng(1))
        self.assertEqual(a.shape, self.images.shape)
        assert_array_equal(a, b)

    def test_zero_padding_crop_is_identity(self):
        assert_array_equal(random_crop(self.images, Rng(0), padding=0), self.images)

    def test_flip_mirrors_columns(self):
        flipped = random_flip(self.images, Rng(3))
        for original, out in zip(self.images, flipped):
            self.assertTrue(np.array_equal(out, original) or np.array_equal(out, original[:, :, ::-1]))


def run_tests():
    """Run all tests."""
    unittest.main(verbosity=2)


if __name__ == "__main__":
    run_tests()
