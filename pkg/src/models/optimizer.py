"""
AdamW with decoupled weight decay, warmup + cosine learning rate, and global
gradient-norm clipping.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from config.settings import ConfigurationError
from src.core import DimensionError

MIN_LR_RATIO = 0.01


def lr_at(step: int, total_steps: int, warmup_steps: int, base_lr: float, min_ratio: float = MIN_LR_RATIO) -> float:
    """Linear 0 -> base_lr over warmup, then cosine down to base_lr * min_ratio at the last step.

    When warmup covers every step there is no decay phase and the run ends
    near base_lr.
    """
    if not 0 <= step < total_steps:
        raise ConfigurationError(f"step {step} outside [0, {total_steps})")
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    span = max(1, total_steps - 1 - warmup_steps)
    progress = min(1.0, (step - warmup_steps) / span)
    floor = base_lr * min_ratio
    return floor + (base_lr - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamWState:
    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Dict[str, np.ndarray],
               grads: Dict[str, np.ndarray],
               state: AdamWState,
               lr: float,
               betas: Tuple[float, float] = (0.9, 0.999),
               eps: float = 1e-8,
               weight_decay: float = 0.0,
               decay: Optional[Dict[str, bool]] = None) -> Tuple[Dict[str, np.ndarray], AdamWState]:
    """One in-place update of every array in `params`, in key order."""
    beta1, beta2 = betas
    state.step += 1
    bias1 = 1.0 - beta1 ** state.step
    bias2 = 1.0 - beta2 ** state.step

    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"{name}: gradient {g.shape} does not match parameter {p.shape}")
        if name not in state.exp_avg:
            state.exp_avg[name] = np.zeros_like(p)
            state.exp_avg_sq[name] = np.zeros_like(p)
        m, v = state.exp_avg[name], state.exp_avg_sq[name]

        if weight_decay and (decay is None or decay.get(name, True)):
            p *= p.dtype.type(1.0 - lr * weight_decay)
        m *= p.dtype.type(beta1)
        m += p.dtype.type(1.0 - beta1) * g
        v *= p.dtype.type(beta2)
        v += p.dtype.type(1.0 - beta2) * g * g
        denom = np.sqrt(v / p.dtype.type(bias2)) + p.dtype.type(eps)
        p -= p.dtype.type(lr / bias1) * m / denom
    return params, state


def clip_grad_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm; returns the norm before clipping."""
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        factor = max_norm / (total + 1e-6)
        for g in grads.values():
            g *= g.dtype.type(factor)
    return total


NO_DECAY = ("cls_token", "pos_embed")


def decay_mask(arrays: Dict[str, np.ndarray]) -> Dict[str, bool]:
    """Weight decay on matrices only; biases, norm parameters, class token and positions are exempt."""
    return {name: a.ndim >= 2 and name not in NO_DECAY for name, a in arrays.items()}


class AdamW:
    """Optimizer state bound to a set of named weight tensors."""

    def __init__(self, weights, weight_decay: float = 0.05, betas=(0.9, 0.999), eps: float = 1e-8):
        self.weights = weights
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.state = AdamWState()
        self.decay = decay_mask(weights.arrays())

    def step(self, lr: float):
        adamw_step(self.weights.arrays(), self.weights.grads(), self.state, lr,
                   self.betas, self.eps, self.weight_decay, self.decay)
