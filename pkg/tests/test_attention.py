"""
Tests for overlapped multi-head attention.
"""

import sys
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import ConfigurationError
from src.attention import (
    AttentionConfig,
    AttentionWeights,
    ScheduleOverflowError,
    mhsa_reference,
    mohsa_forward,
    parse_targets,
    shape_report,
    split_heads_overlapped,
)
from src.core import DimensionError, Rng, Tensor
from src.tools.oracle import SWEEPS, degeneracy_check, forward_sweep


def random_layer(cfg: AttentionConfig, tokens: int, seed: int = 0, batch: int = 2, dtype=np.float32):
    rng = Rng(seed)
    weights = AttentionWeights.initialize(cfg, rng.fork(0), std=0.3, dtype=dtype)
    x = Tensor(rng.fork(1).normal((batch, tokens, cfg.dim)), dtype=dtype)
    return weights, x


class TestAttentionConfig(unittest.TestCase):

    def test_widths(self):
        cfg = AttentionConfig(dim=192, heads=3, overlap=32)
        self.assertEqual((cfg.head_dim, cfg.qk_width, cfg.v_width, cfg.proj_in), (64, 128, 128, 384))

        qk = AttentionConfig(dim=192, heads=3, overlap=32, targets=frozenset("QK"))
        self.assertEqual((qk.qk_width, qk.v_width, qk.proj_in), (128, 64, 192))

        v = AttentionConfig(dim=192, heads=3, overlap=32, targets=frozenset("V"))
        self.assertEqual((v.qk_width, v.v_width, v.proj_in), (64, 128, 384))

    def test_shape_report(self):
        report = shape_report(AttentionConfig(dim=12, heads=3, overlap=2))
        self.assertEqual((report.d_q, report.d_v, report.proj_in), (8, 8, 24))
        # 12*36 + 36 + 24*12 + 12
        self.assertEqual(report.param_count, 768)

    def test_rejects_bad_configs(self):
        with self.assertRaises(ConfigurationError):
            AttentionConfig(dim=10, heads=3)
        with self.assertRaises(ScheduleOverflowError):
            AttentionConfig(dim=12, heads=3, overlap=5)
        with self.assertRaises(ConfigurationError):
            AttentionConfig(dim=12, heads=3, overlap=1, targets=frozenset("Q"))
        with self.assertRaises(ConfigurationError):
            AttentionConfig(dim=12, heads=3, qk_scale="sqrt2")

    def test_parse_targets(self):
        self.assertEqual(parse_targets("q,k"), frozenset("QK"))
        self.assertEqual(parse_targets("QKV"), frozenset("QKV"))
        self.assertEqual(parse_targets("none"), frozenset())
        for bad in ("Q", "KV", "QKX", "QQK"):
            with self.subTest(targets=bad):
                with self.assertRaises(ConfigurationError):
                    parse_targets(bad)


class TestSplitHeads(unittest.TestCase):

    def test_neighbour_columns_and_zero_edges(self):
        x = Tensor(np.arange(6, dtype=np.float64).reshape(1, 6))
        heads = split_heads_overlapped(x, heads=3, head_dim=2, overlap=1).data
        self.assertEqual(heads.shape, (3, 1, 4))
        assert_array_equal(heads[0, 0], [0, 0, 1, 2])
        assert_array_equal(heads[1, 0], [1, 2, 3, 4])
        assert_array_equal(heads[2, 0], [3, 4, 5, 0])

    def test_full_overlap_reaches_adjacent_heads_only(self):
        x = Tensor(np.arange(1, 7, dtype=np.float64).reshape(1, 6))
        heads = split_heads_overlapped(x, heads=3, head_dim=2, overlap=2).data
        assert_array_equal(heads[0, 0], [0, 0, 1, 2, 3, 4])
        assert_array_equal(heads[2, 0], [3, 4, 5, 6, 0, 0])

    def test_width_mismatch(self):
        with self.assertRaises(DimensionError):
            split_heads_overlapped(Tensor(np.ones((2, 7))), heads=3, head_dim=2, overlap=1)


class TestMohsaForward(unittest.TestCase):

    def test_output_shape_matches_input(self):
        cfg = AttentionConfig(dim=12, heads=3, overlap=2)
        weights, x = random_layer(cfg, tokens=5)
        self.assertEqual(mohsa_forward(x, weights, cfg).shape, (2, 5, 12))
        self.assertEqual(mohsa_forward(Tensor(x.data[0]), weights, cfg).shape, (5, 12))

    def test_zero_overlap_is_bitwise_plain_attention(self):
        cfg = AttentionConfig(dim=12, heads=3, overlap=0)
        weights, x = random_layer(cfg, tokens=7, seed=4)
        assert_array_equal(mohsa_forward(x, weights, cfg).data, mhsa_reference(x, weights, cfg).data)

    def test_degeneracy_sweep(self):
        results = degeneracy_check(count=20)
        self.assertEqual(len(results), 20)
        self.assertTrue(all(r.passed for r in results), [r for r in results if not r.passed])

    def test_matches_scalar_oracle(self):
        results = forward_sweep(SWEEPS["smoke"])
        self.assertEqual(len(results), 60)
        failures = [r for r in results if not r.passed]
        self.assertEqual(failures, [])

    def test_overlap_changes_output(self):
        base = AttentionConfig(dim=12, heads=3, overlap=0, targets=frozenset("QK"))
        wide = AttentionConfig(dim=12, heads=3, overlap=2, targets=frozenset("QK"))
        weights, x = random_layer(base, tokens=4, dtype=np.float64)
        a = mohsa_forward(x, weights, base).data
        b = mohsa_forward(x, weights, wide).data
        self.assertFalse(np.allclose(a, b))

    def test_token_permutation_equivariance(self):
        cfg = AttentionConfig(dim=12, heads=3, overlap=2)
        weights, x = random_layer(cfg, tokens=6, seed=7, dtype=np.float64)
        perm = np.array([3, 0, 5, 1, 4, 2])
        out = mohsa_forward(x, weights, cfg).data
        permuted = mohsa_forward(Tensor(x.data[:, perm]), weights, cfg).data
        assert_allclose(permuted, out[:, perm], rtol=1e-12, atol=1e-12)

    def test_scale_modes(self):
        widened = AttentionConfig(dim=12, heads=3, overlap=2, qk_scale="widened")
        base = AttentionConfig(dim=12, heads=3, overlap=2, qk_scale="base")
        weights, x = random_layer(widened, tokens=4, dtype=np.float64)
        self.assertFalse(np.allclose(mohsa_forward(x, weights, widened).data, mohsa_forward(x, weights, base).data))

        plain_w = AttentionConfig(dim=12, heads=3, overlap=0, qk_scale="widened")
        plain_b = AttentionConfig(dim=12, heads=3, overlap=0, qk_scale="base")
        weights, x = random_layer(plain_w, tokens=4, dtype=np.float64)
        assert_array_equal(mohsa_forward(x, weights, plain_w).data, mohsa_forward(x, weights, plain_b).data)

    def test_wrong_token_width(self):
        cfg = AttentionConfig(dim=12, heads=3, overlap=1)
        weights, _ = random_layer(cfg, tokens=2)
        with self.assertRaises(DimensionError):
            mohsa_forward(Tensor(np.ones((2, 3, 8), dtype=np.float32)), weights, cfg)

    def test_weights_must_fit_overlap(self):
        small = AttentionConfig(dim=12, heads=3, overlap=0)
        wide = AttentionConfig(dim=12, heads=3, overlap=1)
        weights, x = random_layer(small, tokens=2)
        with self.assertRaises(ConfigurationError):
            mohsa_forward(x, weights, wide)

    def test_bias_free_layer(self):
        cfg = AttentionConfig(dim=6, heads=2, overlap=1, qkv_bias=False, proj_bias=False)
        weights, x = random_layer(cfg, tokens=3)
        self.assertIsNone(weights.b_qkv)
        self.assertEqual(shape_report(cfg).param_count, 6 * 18 + 2 * 5 * 6)
        self.assertEqual(mohsa_forward(x, weights, cfg).shape, (2, 3, 6))


def run_tests():
    """Run all tests."""
    unittest.main(verbosity=2)


if __name__ == "__main__":
    run_tests()
