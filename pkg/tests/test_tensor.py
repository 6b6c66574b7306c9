"""
Tests for the tensor engine: forward values, backward rules and error cases.
"""

import sys
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

# Add the repository root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core import (
    ContractError,
    DimensionError,
    NonFiniteError,
    RangeError,
    Rng,
    Tensor,
    add,
    as_leaf,
    backward,
    broadcast_to,
    concat,
    gelu,
    layer_norm,
    log_softmax_lastdim,
    matmul,
    mean_all,
    mul,
    reshape,
    scale,
    select,
    slice_zero_pad,
    softmax_lastdim,
    stack,
    sum_all,
    swapaxes,
    transpose_last,
)
from src.tools.oracle import finite_diff, relative_error

GRAD_TOLERANCE = 1e-5


def check_gradients(test, build, *shapes, seed=0):
    """Analytic gradients of sum(build(*inputs) * projection) against central differences."""
    rng = Rng(seed)
    arrays = [rng.fork(i).normal(shape) for i, shape in enumerate(shapes)]
    leaves = [as_leaf(a, dtype=np.float64) for a in arrays]
    out = build(*leaves)
    projection = rng.fork(99).normal(out.shape)
    backward(sum_all(mul(out, projection)))

    def objective():
        return float(np.sum(build(*[Tensor(a) for a in arrays]).data * projection))

    numeric = finite_diff(objective, {str(i): a for i, a in enumerate(arrays)})
    for i, leaf in enumerate(leaves):
        error = relative_error(leaf.grad, numeric[str(i)], 1e-5)
        test.assertLess(error, GRAD_TOLERANCE, f"input {i} of {build}")


class TestGradients(unittest.TestCase):
    """Every backward rule against finite differences at 64-bit."""

    def test_matmul(self):
        check_gradients(self, matmul, (3, 4), (4, 5))

    def test_matmul_stack_times_matrix(self):
        check_gradients(self, matmul, (2, 3, 4), (4, 5))

    def test_matmul_batched(self):
        check_gradients(self, matmul, (2, 2, 3, 4), (2, 2, 4, 3))

    def test_add_with_bias(self):
        check_gradients(self, add, (2, 3, 4), (4,))

    def test_mul_broadcast(self):
        check_gradients(self, mul, (3, 4), (1, 4))

    def test_softmax(self):
        check_gradients(self, softmax_lastdim, (3, 5))

    def test_log_softmax(self):
        check_gradients(self, log_softmax_lastdim, (3, 5))

    def test_layer_norm(self):
        check_gradients(self, lambda x, g, b: layer_norm(x, g, b), (2, 3, 6), (6,), (6,))

    def test_gelu(self):
        check_gradients(self, gelu, (4, 5))

    def test_slice_zero_pad_both_edges(self):
        check_gradients(self, lambda x: slice_zero_pad(x, -2, 7), (3, 5))

    def test_concat_and_stack(self):
        check_gradients(self, lambda a, b: concat([a, b], axis=-1), (2, 3), (2, 4))
        check_gradients(self, lambda a, b: stack([a, b], axis=1), (2, 3), (2, 3))

    def test_select(self):
        check_gradients(self, lambda x: select(x, 1, 2), (2, 4, 3))

    def test_shape_ops(self):
        check_gradients(self, transpose_last, (2, 3, 4))
        check_gradients(self, lambda x: swapaxes(x, 0, 1), (2, 3, 4))
        check_gradients(self, lambda x: reshape(x, (6, 2)), (3, 4))
        check_gradients(self, lambda x: broadcast_to(x, (3, 1, 4)), (1, 1, 4))

    def test_reductions_and_scale(self):
        check_gradients(self, lambda x: scale(mean_all(x), 3.0), (3, 4))
        check_gradients(self, lambda x: scale(x, -0.5), (3, 4))


class TestForward(unittest.TestCase):
    """Forward values and contracts."""

    def test_slice_zero_pad_values(self):
        x = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
        assert_array_equal(slice_zero_pad(x, -1, 3).data, [[0.0, 1.0, 2.0, 3.0]])
        assert_array_equal(slice_zero_pad(x, 2, 6).data, [[3.0, 4.0, 0.0, 0.0]])
        assert_array_equal(slice_zero_pad(x, 5, 7).data, [[0.0, 0.0]])
        assert_array_equal(slice_zero_pad(x, 0, 4).data, x.data)

    def test_slice_zero_pad_rejects_empty_range(self):
        x = Tensor(np.ones((2, 4)))
        with self.assertRaises(RangeError):
            slice_zero_pad(x, 3, 3)
        with self.assertRaises(RangeError):
            slice_zero_pad(x, 3, 1)

    def test_softmax_rows_and_large_inputs(self):
        y = softmax_lastdim(Tensor(np.array([[1000.0, 1000.0], [0.0, np.log(3.0)]]))).data
        assert_allclose(y, [[0.5, 0.5], [0.25, 0.75]], rtol=1e-6)

    def test_layer_norm_statistics(self):
        x = Tensor(Rng(1).normal((4, 8)) * 5 + 3, dtype=np.float64)
        y = layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8))).data
        assert_allclose(y.mean(axis=-1), 0.0, atol=1e-12)
        assert_allclose(y.var(axis=-1), 1.0, rtol=1e-4)

    def test_gelu_values(self):
        y = gelu(Tensor(np.array([0.0, 1.0, -1.0]))).data
        assert_allclose(y, [0.0, 0.8413447460685429, -0.15865525393145707], rtol=1e-6)

    def test_matmul_shape_errors(self):
        with self.assertRaises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
        with self.assertRaises(DimensionError):
            matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))

    def test_add_right_operand_must_broadcast_into_left(self):
        with self.assertRaises(DimensionError):
            add(Tensor(np.ones(3)), Tensor(np.ones((2, 3))))
        with self.assertRaises(DimensionError):
            add(Tensor(np.ones((2, 3))), Tensor(np.ones(2)))

    def test_non_finite_result_raises(self):
        with self.assertRaises(NonFiniteError) as ctx:
            add(Tensor(np.array([np.inf])), 1.0)
        self.assertEqual(ctx.exception.exit_code, 4)

    def test_unsupported_dtype(self):
        with self.assertRaises(ContractError):
            Tensor([1, 2], dtype=np.int32)
        self.assertEqual(Tensor([1, 2]).dtype, np.float32)

    def test_scalar_loss_stays_scalar(self):
        s = sum_all(Tensor(np.ones((2, 2))))
        self.assertEqual(s.shape, ())
        self.assertEqual(s.item(), 4.0)


class TestBackward(unittest.TestCase):
    """Reverse-mode bookkeeping."""

    def test_backward_needs_scalar(self):
        x = as_leaf(np.ones(3))
        with self.assertRaises(ContractError):
            backward(mul(x, 2.0))

    def test_fan_out_accumulates(self):
        x = as_leaf(np.array([1.0, 2.0]))
        backward(sum_all(add(mul(x, x), x)))
        assert_allclose(x.grad, [3.0, 5.0])

    def test_only_leaves_keep_gradients(self):
        x = as_leaf(np.array([1.0, 2.0]))
        hidden = mul(x, 3.0)
        backward(sum_all(hidden))
        self.assertIsNone(hidden.grad)
        assert_allclose(x.grad, [3.0, 3.0])

    def test_gradients_accumulate_across_calls(self):
        x = as_leaf(np.array([1.0]))
        backward(sum_all(mul(x, 2.0)))
        backward(sum_all(mul(x, 2.0)))
        assert_allclose(x.grad, [4.0])
        x.zero_grad()
        assert_allclose(x.grad, [0.0])

    def test_constants_get_no_gradient(self):
        c = Tensor(np.array([1.0, 2.0]))
        x = as_leaf(np.array([3.0, 4.0]))
        backward(sum_all(mul(x, c)))
        self.assertIsNone(c.grad)
        assert_allclose(x.grad, [1.0, 2.0])


def run_tests():
    """Run all tests."""
    unittest.main(verbosity=2)


if __name__ == "__main__":
    run_tests()
