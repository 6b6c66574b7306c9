"""
Tests for the scalar-loop references and gradient checks.
"""

import math
import sys
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import NumericError
from src.attention import AttentionConfig
from src.models import load_model_config
from src.tools.oracle import (
    SWEEPS,
    CheckResult,
    GRAD_REL_FLOOR,
    REL_FLOOR,
    GradcheckFailure,
    finite_diff,
    format_results,
    gradcheck_attention,
    gradcheck_model,
    naive_attention,
    relative_error,
    require_passed,
)


class TestFiniteDiff(unittest.TestCase):

    def test_square(self):
        theta = np.array([3.0])
        grads = finite_diff(lambda: float(theta[0] ** 2), {"theta": theta})
        assert_allclose(grads["theta"], [6.0], rtol=1e-8)

    def test_constant_and_restore(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        grads = finite_diff(lambda: 7.0, {"a": a})
        assert_allclose(grads["a"], np.zeros((2, 2)))
        assert_allclose(a, [[1.0, 2.0], [3.0, 4.0]])

    def test_several_parameters(self):
        x, y = np.array([1.0, 2.0]), np.array([0.5])
        grads = finite_diff(lambda: float(np.sum(x * x) * y[0]), {"x": x, "y": y})
        assert_allclose(grads["x"], [1.0, 2.0], rtol=1e-7)
        assert_allclose(grads["y"], [5.0], rtol=1e-7)

    def test_rejects_bad_eps(self):
        with self.assertRaises(NumericError):
            finite_diff(lambda: 0.0, {"a": np.zeros(1)}, eps=-1.0)


class TestRelativeError(unittest.TestCase):

    def test_values(self):
        self.assertEqual(relative_error([1.0, 2.0], [1.0, 2.0]), 0.0)
        self.assertAlmostEqual(relative_error([1.0], [3.0]), 0.5)
        self.assertEqual(relative_error([0.0], [0.0]), 0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(NumericError):
            relative_error(np.zeros(2), np.zeros(3))

    def test_gradient_floor_absorbs_round_off_on_zero_gradients(self):
        # analytic 0 against a central difference that is pure round-off
        self.assertEqual((REL_FLOOR, GRAD_REL_FLOOR), (1e-8, 1e-5))
        self.assertGreater(relative_error([0.0], [3e-11]), 1e-3)
        self.assertLess(relative_error([0.0], [3e-11], floor=GRAD_REL_FLOOR), 1e-5)
        self.assertAlmostEqual(relative_error([1.0], [1.001], floor=GRAD_REL_FLOOR), 0.001 / 2.001)


class TestNaiveAttention(unittest.TestCase):

    def test_single_key_returns_its_value(self):
        out = naive_attention([[1.0, 2.0]], [[0.5, -1.0]], [[3.0, 4.0, 5.0]])
        self.assertEqual(out, [[3.0, 4.0, 5.0]])

    def test_equal_scores_average_values(self):
        out = naive_attention([[0.0]], [[1.0], [2.0]], [[2.0], [4.0]])
        self.assertAlmostEqual(out[0][0], 3.0)

    def test_scaling(self):
        # scores 2/sqrt(4) = 1 and 0
        out = naive_attention([[2.0]], [[1.0], [0.0]], [[1.0], [0.0]], d_k=4)
        self.assertAlmostEqual(out[0][0], math.e / (math.e + 1.0))


class TestGradcheck(unittest.TestCase):

    def test_layer_cases(self):
        cases = [
            (AttentionConfig(dim=6, heads=2, overlap=1), 3),
            (AttentionConfig(dim=6, heads=3, overlap=2, targets=frozenset("V")), 3),
            (AttentionConfig(dim=6, heads=3, overlap=1, targets=frozenset("QK")), 2),
            (AttentionConfig(dim=6, heads=1, overlap=0), 1),
            (AttentionConfig(dim=6, heads=2, overlap=3, qk_scale="base"), 3),
        ]
        for cfg, tokens in cases:
            with self.subTest(overlap=cfg.overlap, heads=cfg.heads, tokens=tokens):
                result = gradcheck_attention(cfg, tokens)
                self.assertTrue(result.passed, result)

    def test_whole_toy_model(self):
        cfg = load_model_config("vit-toy", {"policy": "fixed 1"})
        results = gradcheck_model(cfg, seed=0)
        # embedding 4, twelve per layer, final norm and head 4
        self.assertEqual(len(results), 4 + 2 * 12 + 4)
        failures = [r for r in results if not r.passed]
        self.assertEqual(failures, [])

    def test_sweep_sizes(self):
        self.assertEqual(len(SWEEPS["small"]), 198)
        self.assertEqual(len(SWEEPS["smoke"]), 60)


class TestReporting(unittest.TestCase):

    def test_require_passed(self):
        good = [CheckResult("a", 1e-9, 1e-5)]
        require_passed(good, "ok")
        bad = good + [CheckResult("b", 1e-2, 1e-5)]
        with self.assertRaises(GradcheckFailure) as ctx:
            require_passed(bad, "layer")
        self.assertEqual(ctx.exception.exit_code, 4)
        self.assertIn("b", str(ctx.exception))

    def test_format_results(self):
        text = format_results([CheckResult("a", 1e-9, 1e-5), CheckResult("b", 1e-2, 1e-5)], "demo")
        self.assertTrue(text.startswith("demo: 1/2 passed"))
        self.assertIn("FAIL", text)
        self.assertIn("worst: b", text)


def run_tests():
    """Run all tests."""
    unittest.main(verbosity=2)


if __name__ == "__main__":
    run_tests()
