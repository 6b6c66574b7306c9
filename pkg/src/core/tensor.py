"""
Dense tensor engine with reverse-mode gradients.
Provides the forward operations and backward rules a Vision Transformer needs,
including the zero-padded last-axis slice that overlapped heads are cut from.
"""

from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from config.settings import ConfigurationError, MohsaError, NumericError

DEFAULT_DTYPE = np.float32
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_SQRT_HALF = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


class DimensionError(ConfigurationError):
    """Operand shapes do not fit the operation."""
    pass


class RangeError(DimensionError):
    """Empty or inverted slice range."""
    pass


class ContractError(MohsaError):
    """An operation was used outside its contract."""
    pass


class NonFiniteError(NumericError):
    """An operation produced NaN or Inf."""
    pass


BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def _contiguous(array: np.ndarray) -> np.ndarray:
    """Row-major storage; keeps 0-d arrays 0-d, unlike np.ascontiguousarray."""
    return array if array.flags.c_contiguous else np.array(array, order="C")


class Tensor:
    """Row-major array plus the bookkeeping reverse mode needs."""

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        if dtype is not None:
            array = np.asarray(data, dtype=dtype)
        elif isinstance(data, np.ndarray) and data.dtype in SUPPORTED_DTYPES:
            array = data
        else:
            array = np.asarray(data, dtype=DEFAULT_DTYPE)
        if array.dtype not in SUPPORTED_DTYPES:
            raise ContractError(f"Unsupported element type {array.dtype}")
        self.data = _contiguous(array)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"Tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def astype(self, dtype) -> "Tensor":
        """Detached copy in another element type."""
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"


def _as_tensor(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def _result(data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    """Wrap an op output, enforce finiteness and attach the backward rule."""
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values (shape {data.shape})")
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the operand shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast_into(a: Tensor, b: Tensor, op: str):
    try:
        target = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        target = None
    if target != a.shape:
        raise DimensionError(f"{op}: right operand {b.shape} does not broadcast into {a.shape}")


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; batch extents agree or broadcast from 1."""
    b = _as_tensor(b, a)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch extents of {a.shape} and {b.shape} do not broadcast")

    # A stack of rows times one matrix is a single GEMM.
    flat = b.ndim == 2 and a.ndim > 2
    if flat:
        k = a.shape[-1]
        out = (a.data.reshape(-1, k) @ b.data).reshape(a.shape[:-1] + (b.shape[-1],))
    else:
        out = np.matmul(a.data, b.data)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if flat:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _result(out, (a, b), backward, "matmul")


def transpose_last(x: Tensor) -> Tensor:
    """Swap the two trailing axes."""
    if x.ndim < 2:
        raise DimensionError(f"transpose_last: need rank >= 2, got {x.shape}")
    out = _contiguous(np.swapaxes(x.data, -1, -2))
    return _result(out, (x,), lambda g: (np.swapaxes(g, -1, -2),), "transpose_last")


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    out = _contiguous(np.swapaxes(x.data, axis1, axis2))
    return _result(out, (x,), lambda g: (np.swapaxes(g, axis1, axis2),), "swapaxes")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"reshape: cannot view {x.shape} as {tuple(shape)}")
    return _result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


# ---------------------------------------------------------------------------
# Elementwise and reductions
# ---------------------------------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    """a + b where b broadcasts into the shape of a."""
    b = _as_tensor(b, a)
    _check_broadcast_into(a, b, "add")

    def backward(g):
        return g, (_unbroadcast(g, b.shape) if b.requires_grad else None)

    return _result(a.data + b.data, (a, b), backward, "add")


def mul(a: Tensor, b) -> Tensor:
    """a * b where b broadcasts into the shape of a."""
    b = _as_tensor(b, a)
    _check_broadcast_into(a, b, "mul")

    def backward(g):
        ga = g * b.data if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data * b.data, (a, b), backward, "mul")


def scale(x: Tensor, factor: float) -> Tensor:
    factor = x.dtype.type(factor)
    return _result(x.data * factor, (x,), lambda g: (g * factor,), "scale")


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(), dtype=x.dtype)
    return _result(out, (x,), lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),), "sum_all")


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = np.asarray(x.data.sum() / n, dtype=x.dtype)
    return _result(out, (x,), lambda g: (np.full(x.shape, g / n, dtype=x.dtype),), "mean_all")


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = _contiguous(np.broadcast_to(x.data, shape))
    except ValueError:
        raise DimensionError(f"broadcast_to: {x.shape} cannot expand to {shape}")
    return _result(out, (x,), lambda g: (_unbroadcast(g, x.shape),), "broadcast_to")


# ---------------------------------------------------------------------------
# Normalization and activations
# ---------------------------------------------------------------------------

def softmax_lastdim(x: Tensor) -> Tensor:
    """Row softmax with max subtraction."""
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DimensionError(f"softmax_lastdim: empty last axis in {x.shape}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result(y, (x,), backward, "softmax_lastdim")


def log_softmax_lastdim(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _result(out, (x,), backward, "log_softmax_lastdim")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize each last-axis vector, then apply the affine."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match width {d}")
    if not eps > 0:
        raise ContractError(f"layer_norm: eps must be positive, got {eps}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gx = ggamma = gbeta = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = inv * (gxhat
                        - gxhat.mean(axis=-1, keepdims=True)
                        - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        if gamma.requires_grad:
            ggamma = (g * xhat).reshape(-1, d).sum(axis=0)
        if beta.requires_grad:
            gbeta = g.reshape(-1, d).sum(axis=0)
        return gx, ggamma, gbeta

    return _result(out, (x, gamma, beta), backward, "layer_norm")


def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    cdf = 0.5 * (1.0 + erf(x.data * x.dtype.type(_SQRT_HALF)))
    out = x.data * cdf

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf).astype(x.dtype),)

    return _result(out.astype(x.dtype), (x,), backward, "gelu")


# ---------------------------------------------------------------------------
# Slicing, joining and selection
# ---------------------------------------------------------------------------

def slice_zero_pad(x: Tensor, lo: int, hi: int) -> Tensor:
    """Columns [lo, hi) of the last axis; positions outside [0, D) read zero."""
    if lo >= hi:
        raise RangeError(f"slice_zero_pad: empty range [{lo}, {hi})")
    d = x.shape[-1]
    src_lo, src_hi = max(lo, 0), min(hi, d)
    out = np.zeros(x.shape[:-1] + (hi - lo,), dtype=x.dtype)
    if src_lo < src_hi:
        out[..., src_lo - lo:src_hi - lo] = x.data[..., src_lo:src_hi]

    def backward(g):
        gx = np.zeros_like(x.data)
        if src_lo < src_hi:
            gx[..., src_lo:src_hi] = g[..., src_lo - lo:src_hi - lo]
        return (gx,)

    return _result(out, (x,), backward, "slice_zero_pad")


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not parts:
        raise DimensionError("concat: no parts")
    rank = parts[0].ndim
    axis = axis % rank
    for p in parts:
        if p.ndim != rank or p.shape[:axis] + p.shape[axis + 1:] != parts[0].shape[:axis] + parts[0].shape[axis + 1:]:
            raise DimensionError(f"concat: {p.shape} does not match {parts[0].shape} off axis {axis}")
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(parts)))

    return _result(out, tuple(parts), backward, "concat")


def concat_lastdim(parts: Sequence[Tensor]) -> Tensor:
    return concat(parts, axis=-1)


def stack(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts or any(p.shape != parts[0].shape for p in parts):
        raise DimensionError(f"stack: parts must share one shape, got {[p.shape for p in parts]}")
    out = np.stack([p.data for p in parts], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return _result(out, tuple(parts), backward, "stack")


def select(x: Tensor, axis: int, index: int) -> Tensor:
    """Drop `axis` by taking one index along it."""
    axis = axis % x.ndim
    if not 0 <= index < x.shape[axis]:
        raise RangeError(f"select: index {index} outside axis {axis} of {x.shape}")
    out = _contiguous(np.take(x.data, index, axis=axis))

    def backward(g):
        gx = np.zeros_like(x.data)
        slicer = [slice(None)] * x.ndim
        slicer[axis] = index
        gx[tuple(slicer)] = g
        return (gx,)

    return _result(out, (x,), backward, "select")


# ---------------------------------------------------------------------------
# Reverse mode
# ---------------------------------------------------------------------------

def _topological_order(root: Tensor) -> List[Tensor]:
    """Parents before children; iterative so deep encoders do not hit the recursion limit."""
    order, visited = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack_.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and id(parent) not in visited:
                stack_.append((parent, False))
    return order


def backward(loss: Tensor):
    """Accumulate dloss/dleaf into `.grad` of every reachable requires_grad leaf."""
    if loss.ndim != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.astype(node.dtype, copy=True) if node.grad is None else (node.grad + g).astype(node.dtype, copy=False)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + pg if key in pending else pg


def as_leaf(values: Union[np.ndarray, Tensor], requires_grad: bool = True, dtype=None, name: Optional[str] = None) -> Tensor:
    data = values.data if isinstance(values, Tensor) else values
    return Tensor(np.array(data, dtype=dtype or np.asarray(data).dtype, copy=True), requires_grad=requires_grad, name=name)
