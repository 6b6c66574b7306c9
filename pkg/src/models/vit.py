"""
Vision Transformer with MOHSA encoder layers.
Patch embedding, class token, learned positions, pre-norm residual layers
(attention + FFN) and a linear classifier on the class token.
"""

from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import ConfigurationError, DataError
from src.core import (
    Rng,
    Tensor,
    DimensionError,
    add,
    as_leaf,
    broadcast_to,
    concat,
    gelu,
    layer_norm,
    log_softmax_lastdim,
    matmul,
    mul,
    reshape,
    scale,
    select,
    sum_all,
)
from src.attention import (
    AttentionConfig,
    AttentionWeights,
    OverlapSchedule,
    build_schedule,
    expected_shapes as attention_shapes,
    mohsa_forward,
    parse_policy,
    parse_targets,
)

IN_CHANNELS = 3
INIT_STD = 0.02
INIT_BOUND = 2.0


class LabelError(DataError):
    """Label outside [0, num_classes)."""
    pass


class ModelConfig(BaseModel):
    """ViT + MOHSA hyperparameters; `policy` uses the schedule grammar."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    image_size: int = Field(gt=0)
    patch_size: int = Field(gt=0)
    dim: int = Field(gt=0)
    depth: int = Field(gt=0)
    heads: int = Field(gt=0)
    mlp_ratio: float = Field(default=4.0, gt=0)
    num_classes: int = Field(gt=1)
    policy: str = "fixed 0"
    targets: str = "QKV"
    drop_path_rate: float = Field(default=0.0, ge=0.0, lt=1.0)
    qkv_bias: bool = True
    proj_bias: bool = True
    qk_scale: str = "widened"
    ln_eps: float = Field(default=1e-6, gt=0.0)

    @model_validator(mode="after")
    def _check_geometry(self):
        if self.image_size % self.patch_size:
            raise ConfigurationError(f"patch_size {self.patch_size} does not divide image_size {self.image_size}")
        if self.dim % self.heads:
            raise ConfigurationError(f"heads {self.heads} does not divide dim {self.dim}")
        if self.hidden_dim < 1:
            raise ConfigurationError(f"mlp_ratio {self.mlp_ratio} leaves no hidden units")
        # Parses the policy and targets, and rejects overflowing schedules.
        for layer in range(self.depth):
            self.attention_config(layer)
        return self

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    @property
    def num_tokens(self) -> int:
        return self.num_patches + 1

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def hidden_dim(self) -> int:
        return int(round(self.mlp_ratio * self.dim))

    @property
    def patch_dim(self) -> int:
        return IN_CHANNELS * self.patch_size * self.patch_size

    @property
    def schedule(self) -> OverlapSchedule:
        return build_schedule(parse_policy(self.policy), self.depth, self.head_dim)

    def attention_config(self, layer: int) -> AttentionConfig:
        return AttentionConfig(
            dim=self.dim,
            heads=self.heads,
            overlap=self.schedule[layer],
            targets=parse_targets(self.targets),
            qkv_bias=self.qkv_bias,
            proj_bias=self.proj_bias,
            qk_scale=self.qk_scale,
        )


def expected_weight_shapes(cfg: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Every learnable array of the model, in initialization order."""
    d, hid = cfg.dim, cfg.hidden_dim
    shapes = {
        "patch_embed.weight": (cfg.patch_dim, d),
        "patch_embed.bias": (d,),
        "cls_token": (d,),
        "pos_embed": (cfg.num_tokens, d),
    }
    for layer in range(cfg.depth):
        prefix = f"blocks.{layer}"
        shapes[f"{prefix}.norm1.weight"] = (d,)
        shapes[f"{prefix}.norm1.bias"] = (d,)
        for name, shape in attention_shapes(cfg.attention_config(layer)).items():
            shapes[f"{prefix}.attn.{name}"] = shape
        shapes[f"{prefix}.norm2.weight"] = (d,)
        shapes[f"{prefix}.norm2.bias"] = (d,)
        shapes[f"{prefix}.mlp.fc1.weight"] = (d, hid)
        shapes[f"{prefix}.mlp.fc1.bias"] = (hid,)
        shapes[f"{prefix}.mlp.fc2.weight"] = (hid, d)
        shapes[f"{prefix}.mlp.fc2.bias"] = (d,)
    shapes["norm.weight"] = (d,)
    shapes["norm.bias"] = (d,)
    shapes["head.weight"] = (d, cfg.num_classes)
    shapes["head.bias"] = (cfg.num_classes,)
    return shapes


class ModelWeights:
    """Named learnable tensors of one model."""

    def __init__(self, tensors: Dict[str, Tensor]):
        self.tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def num_params(self) -> int:
        return sum(int(t.data.size) for t in self.tensors.values())

    def check(self, cfg: ModelConfig):
        expected = expected_weight_shapes(cfg)
        actual = {name: t.shape for name, t in self.tensors.items()}
        if actual != expected:
            wrong = sorted(n for n in set(expected) | set(actual) if expected.get(n) != actual.get(n))
            details = ", ".join(f"{n}: have {actual.get(n)}, need {expected.get(n)}" for n in wrong[:6])
            raise DimensionError(f"Weights do not fit the model config ({len(wrong)} mismatches): {details}")

    def attention(self, layer: int) -> AttentionWeights:
        prefix = f"blocks.{layer}.attn."
        return AttentionWeights(
            w_qkv=self.tensors[prefix + "w_qkv"],
            w_proj=self.tensors[prefix + "w_proj"],
            b_qkv=self.tensors.get(prefix + "b_qkv"),
            b_proj=self.tensors.get(prefix + "b_proj"),
        )

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: t.data for name, t in self.tensors.items()}

    def grads(self) -> Dict[str, np.ndarray]:
        return {name: t.grad for name, t in self.tensors.items()}

    def detached(self) -> "ModelWeights":
        """Same storage, no gradient tracking."""
        return ModelWeights({name: Tensor(t.data) for name, t in self.tensors.items()})

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], requires_grad: bool = True, dtype=None) -> "ModelWeights":
        return cls({name: as_leaf(a, requires_grad=requires_grad, dtype=dtype, name=name) for name, a in arrays.items()})


def init_weights(cfg: ModelConfig, seed: int, dtype=np.float32) -> ModelWeights:
    """Truncated normal (std 0.02, +-2 sigma) for matrices, positions and the class
    token; zeros for biases; ones for norm scales."""
    rng = Rng(seed)
    tensors = {}
    for name, shape in expected_weight_shapes(cfg).items():
        if name.endswith("norm1.weight") or name.endswith("norm2.weight") or name == "norm.weight":
            values = np.ones(shape)
        elif len(shape) == 2 or name == "cls_token":
            values = rng.truncated_normal(shape, std=INIT_STD, bound=INIT_BOUND)
        else:
            values = np.zeros(shape)
        tensors[name] = as_leaf(values, dtype=dtype, name=name)
    return ModelWeights(tensors)


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """[B, C, H, W] -> [B, patches, C*p*p]; patches row-major, vector index c*p*p + y*p + x."""
    b, c, h, w = images.shape
    p = patch_size
    grid = images.reshape(b, c, h // p, p, w // p, p)
    return np.ascontiguousarray(grid.transpose(0, 2, 4, 1, 3, 5).reshape(b, (h // p) * (w // p), c * p * p))


def drop_path(x: Tensor, rate: float, rng: Optional[Rng]) -> Tensor:
    """Per-sample stochastic depth on a [B, ...] residual branch."""
    if rate <= 0.0 or rng is None:
        return x
    keep = 1.0 - rate
    mask = (rng.uniform(x.shape[0]) < keep).astype(x.dtype) / x.dtype.type(keep)
    return mul(x, mask.reshape((x.shape[0],) + (1,) * (x.ndim - 1)))


def _linear(x: Tensor, w: ModelWeights, prefix: str) -> Tensor:
    return add(matmul(x, w[prefix + ".weight"]), w[prefix + ".bias"])


def _layer_norm(x: Tensor, w: ModelWeights, prefix: str, eps: float) -> Tensor:
    return layer_norm(x, w[prefix + ".weight"], w[prefix + ".bias"], eps)


def forward(images, w: ModelWeights, cfg: ModelConfig, rng: Optional[Rng] = None) -> Tensor:
    """Logits [B, num_classes]. Passing `rng` enables stochastic depth (training)."""
    pixels = images.data if isinstance(images, Tensor) else np.asarray(images)
    if pixels.ndim != 4 or pixels.shape[1:] != (IN_CHANNELS, cfg.image_size, cfg.image_size):
        raise DimensionError(
            f"Images must be [B, {IN_CHANNELS}, {cfg.image_size}, {cfg.image_size}], got {pixels.shape}")
    dtype = w["patch_embed.weight"].dtype
    batch = pixels.shape[0]

    patches = Tensor(patchify(pixels.astype(dtype, copy=False), cfg.patch_size))
    x = _linear(patches, w, "patch_embed")
    cls = broadcast_to(reshape(w["cls_token"], (1, 1, cfg.dim)), (batch, 1, cfg.dim))
    x = add(concat([cls, x], axis=1), w["pos_embed"])

    for layer in range(cfg.depth):
        prefix = f"blocks.{layer}"
        rate = cfg.drop_path_rate * layer / max(1, cfg.depth - 1)
        h = mohsa_forward(_layer_norm(x, w, prefix + ".norm1", cfg.ln_eps), w.attention(layer), cfg.attention_config(layer))
        x = add(x, drop_path(h, rate, rng))
        h = _linear(gelu(_linear(_layer_norm(x, w, prefix + ".norm2", cfg.ln_eps), w, prefix + ".mlp.fc1")), w, prefix + ".mlp.fc2")
        x = add(x, drop_path(h, rate, rng))

    x = _layer_norm(x, w, "norm", cfg.ln_eps)
    return _linear(select(x, 1, 0), w, "head")


def smoothed_targets(labels: np.ndarray, num_classes: int, smoothing: float, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelError(f"Labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]")
    targets = np.full((labels.shape[0], num_classes), smoothing / num_classes, dtype=np.float64)
    targets[np.arange(labels.shape[0]), labels] += 1.0 - smoothing
    return targets.astype(dtype)


def loss(logits: Tensor, labels: np.ndarray, smoothing: float = 0.0) -> Tensor:
    """Mean label-smoothed cross-entropy."""
    if not 0.0 <= smoothing < 1.0:
        raise ConfigurationError(f"label smoothing must lie in [0, 1), got {smoothing}")
    batch, classes = logits.shape
    targets = smoothed_targets(labels, classes, smoothing, dtype=logits.dtype)
    return scale(sum_all(mul(log_softmax_lastdim(logits), targets)), -1.0 / batch)


def predictions(logits: Tensor) -> np.ndarray:
    return np.argmax(logits.data, axis=-1)
