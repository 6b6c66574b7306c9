"""
Numeric core for the MOHSA toolkit.
Tensor operations with reverse-mode gradients and the deterministic Rng.
"""

from .rng import Rng
from .tensor import (
    Tensor,
    DimensionError,
    RangeError,
    ContractError,
    NonFiniteError,
    matmul,
    softmax_lastdim,
    log_softmax_lastdim,
    slice_zero_pad,
    layer_norm,
    gelu,
    concat,
    concat_lastdim,
    stack,
    select,
    add,
    mul,
    scale,
    sum_all,
    mean_all,
    reshape,
    swapaxes,
    transpose_last,
    broadcast_to,
    backward,
    as_leaf,
)

__all__ = [
    'Rng',
    'Tensor',
    'DimensionError',
    'RangeError',
    'ContractError',
    'NonFiniteError',
    'matmul',
    'softmax_lastdim',
    'log_softmax_lastdim',
    'slice_zero_pad',
    'layer_norm',
    'gelu',
    'concat',
    'concat_lastdim',
    'stack',
    'select',
    'add',
    'mul',
    'scale',
    'sum_all',
    'mean_all',
    'reshape',
    'swapaxes',
    'transpose_last',
    'broadcast_to',
    'backward',
    'as_leaf',
]
