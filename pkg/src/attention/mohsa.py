"""
Multi-Overlapped-Head Self-Attention.

Each head reads its own head_dim columns of Q, K and V plus `o` columns from
each neighbouring head; the first and last heads see zeros where a neighbour
is missing. Heads are concatenated to width h * (head_dim + 2o) and projected
back to the token width. With o = 0 the layer is plain multi-head attention.
"""

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Tuple

import numpy as np

from config.settings import ConfigurationError
from src.core import (
    Rng,
    Tensor,
    DimensionError,
    add,
    as_leaf,
    concat_lastdim,
    matmul,
    reshape,
    scale,
    select,
    slice_zero_pad,
    softmax_lastdim,
    stack,
    swapaxes,
    transpose_last,
)
from src.attention.schedule import ScheduleOverflowError

ALL_TARGETS: FrozenSet[str] = frozenset("QKV")
QK_SCALE_MODES = ("widened", "base")


def parse_targets(text: str) -> FrozenSet[str]:
    """"QKV", "Q,K", "v", "none" -> set of overlapped tensors."""
    cleaned = (text or "").replace(",", "").replace(" ", "").upper()
    if cleaned in ("", "NONE"):
        return frozenset()
    targets = frozenset(cleaned)
    if len(cleaned) != len(targets) or not targets <= ALL_TARGETS:
        raise ConfigurationError(f"Overlap targets must be drawn from Q, K, V; got {text!r}")
    _check_qk_pair(targets)
    return targets


def render_targets(targets: FrozenSet[str]) -> str:
    return "".join(t for t in "QKV" if t in targets) or "none"


def _check_qk_pair(targets: FrozenSet[str]):
    if ("Q" in targets) != ("K" in targets):
        raise ConfigurationError("Q and K must be overlapped together; mismatched widths break Q·K^T")


@dataclass(frozen=True)
class AttentionConfig:
    """One layer's attention hyperparameters; `overlap` is its schedule entry."""
    dim: int
    heads: int
    overlap: int = 0
    targets: FrozenSet[str] = ALL_TARGETS
    qkv_bias: bool = True
    proj_bias: bool = True
    qk_scale: str = "widened"

    def __post_init__(self):
        if self.dim < 1 or self.heads < 1 or self.dim % self.heads:
            raise ConfigurationError(f"dim {self.dim} must be a positive multiple of heads {self.heads}")
        if self.overlap < 0:
            raise ConfigurationError(f"overlap must be non-negative, got {self.overlap}")
        if self.overlap > self.head_dim:
            raise ScheduleOverflowError(f"overlap {self.overlap} exceeds head_dim {self.head_dim}")
        if not self.targets <= ALL_TARGETS:
            raise ConfigurationError(f"Unknown overlap targets {sorted(self.targets)}")
        _check_qk_pair(self.targets)
        if self.qk_scale not in QK_SCALE_MODES:
            raise ConfigurationError(f"qk_scale must be one of {QK_SCALE_MODES}, got {self.qk_scale!r}")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def qk_overlap(self) -> int:
        return self.overlap if "Q" in self.targets else 0

    @property
    def v_overlap(self) -> int:
        return self.overlap if "V" in self.targets else 0

    @property
    def qk_width(self) -> int:
        return self.head_dim + 2 * self.qk_overlap

    @property
    def v_width(self) -> int:
        return self.head_dim + 2 * self.v_overlap

    @property
    def proj_in(self) -> int:
        return self.heads * self.v_width

    @property
    def scale_width(self) -> int:
        """d_k under the scale denominator."""
        return self.qk_width if self.qk_scale == "widened" else self.head_dim


class ShapeReport(NamedTuple):
    d_q: int
    d_v: int
    proj_in: int
    param_count: int


def expected_shapes(cfg: AttentionConfig) -> Dict[str, Tuple[int, ...]]:
    shapes = {"w_qkv": (cfg.dim, 3 * cfg.dim), "w_proj": (cfg.proj_in, cfg.dim)}
    if cfg.qkv_bias:
        shapes["b_qkv"] = (3 * cfg.dim,)
    if cfg.proj_bias:
        shapes["b_proj"] = (cfg.dim,)
    return shapes


@dataclass
class AttentionWeights:
    """Learnable arrays of one attention layer."""
    w_qkv: Tensor
    w_proj: Tensor
    b_qkv: Optional[Tensor] = None
    b_proj: Optional[Tensor] = None

    def named_tensors(self) -> List[Tuple[str, Tensor]]:
        items = [("w_qkv", self.w_qkv), ("b_qkv", self.b_qkv), ("w_proj", self.w_proj), ("b_proj", self.b_proj)]
        return [(name, t) for name, t in items if t is not None]

    def check(self, cfg: AttentionConfig):
        expected = expected_shapes(cfg)
        actual = {name: t.shape for name, t in self.named_tensors()}
        if actual != expected:
            listing = ", ".join(f"{k}={v}" for k, v in expected.items())
            raise ConfigurationError(f"Attention weights {actual} do not fit config; expected {listing}")

    @classmethod
    def initialize(cls, cfg: AttentionConfig, rng: Rng, std: float = 0.02, dtype=np.float32) -> "AttentionWeights":
        """Truncated-normal matrices, zero biases."""
        shapes = expected_shapes(cfg)
        return cls(
            w_qkv=as_leaf(rng.truncated_normal(shapes["w_qkv"], std=std), dtype=dtype),
            w_proj=as_leaf(rng.truncated_normal(shapes["w_proj"], std=std), dtype=dtype),
            b_qkv=as_leaf(np.zeros(shapes["b_qkv"]), dtype=dtype) if cfg.qkv_bias else None,
            b_proj=as_leaf(np.zeros(shapes["b_proj"]), dtype=dtype) if cfg.proj_bias else None,
        )


def split_heads_overlapped(x: Tensor, heads: int, head_dim: int, overlap: int) -> Tensor:
    """[..., T, h*head_dim] -> [..., h, T, head_dim + 2*overlap]."""
    if overlap > head_dim:
        raise ScheduleOverflowError(f"overlap {overlap} exceeds head_dim {head_dim}")
    if x.shape[-1] != heads * head_dim:
        raise DimensionError(f"split_heads_overlapped: width {x.shape[-1]} != {heads} x {head_dim}")
    parts = [slice_zero_pad(x, i * head_dim - overlap, (i + 1) * head_dim + overlap) for i in range(heads)]
    return stack(parts, axis=-3)


def attention_head(q: Tensor, k: Tensor, v: Tensor, d_k: Optional[int] = None) -> Tensor:
    """softmax(q k^T / sqrt(d_k)) v over any leading batch axes."""
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"attention_head: query width {q.shape[-1]} != key width {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"attention_head: {k.shape[-2]} keys but {v.shape[-2]} values")
    d_k = d_k or q.shape[-1]
    scores = scale(matmul(q, transpose_last(k)), 1.0 / math.sqrt(d_k))
    return matmul(softmax_lastdim(scores), v)


def _project_in(tokens: Tensor, w: AttentionWeights, cfg: AttentionConfig) -> Tensor:
    if tokens.shape[-1] != cfg.dim:
        raise DimensionError(f"tokens have width {tokens.shape[-1]}, layer expects {cfg.dim}")
    w.check(cfg)
    qkv = matmul(tokens, w.w_qkv)
    return add(qkv, w.b_qkv) if w.b_qkv is not None else qkv


def _project_out(merged: Tensor, w: AttentionWeights) -> Tensor:
    out = matmul(merged, w.w_proj)
    return add(out, w.b_proj) if w.b_proj is not None else out


def mohsa_forward(tokens: Tensor, w: AttentionWeights, cfg: AttentionConfig) -> Tensor:
    """[..., T, dim] -> [..., T, dim] through overlapped heads."""
    qkv = _project_in(tokens, w, cfg)
    d, h, hd = cfg.dim, cfg.heads, cfg.head_dim
    q = split_heads_overlapped(slice_zero_pad(qkv, 0, d), h, hd, cfg.qk_overlap)
    k = split_heads_overlapped(slice_zero_pad(qkv, d, 2 * d), h, hd, cfg.qk_overlap)
    v = split_heads_overlapped(slice_zero_pad(qkv, 2 * d, 3 * d), h, hd, cfg.v_overlap)
    heads = attention_head(q, k, v, d_k=cfg.scale_width)
    merged = concat_lastdim([select(heads, -3, i) for i in range(h)])
    return _project_out(merged, w)


def mhsa_reference(tokens: Tensor, w: AttentionWeights, cfg: AttentionConfig) -> Tensor:
    """Plain multi-head attention with reshape-based head splitting.
    The overlap in `cfg` is ignored, so `w` must have the o = 0 shapes."""
    plain = AttentionConfig(cfg.dim, cfg.heads, 0, cfg.targets, cfg.qkv_bias, cfg.proj_bias, cfg.qk_scale)
    qkv = _project_in(tokens, w, plain)
    lead = tokens.shape[:-1]
    h, hd = plain.heads, plain.head_dim
    # [..., T, 3, h, hd] -> three [..., h, T, hd]
    parts = reshape(qkv, lead + (3, h, hd))
    q, k, v = (swapaxes(select(parts, -3, i), -3, -2) for i in range(3))
    heads = attention_head(q, k, v, d_k=hd)
    merged = reshape(swapaxes(heads, -3, -2), lead + (h * hd,))
    return _project_out(merged, w)


def shape_report(cfg: AttentionConfig) -> ShapeReport:
    """Effective widths and the exact learnable-scalar count of one layer."""
    params = sum(int(np.prod(s)) for s in expected_shapes(cfg).values())
    return ShapeReport(d_q=cfg.qk_width, d_v=cfg.v_width, proj_in=cfg.proj_in, param_count=params)
