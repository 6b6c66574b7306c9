"""
Scalar-loop reference implementations and finite-difference gradient checks.

The naive_* functions work on nested Python lists of floats with the `math`
module only and never call the tensor engine. The sweep and gradcheck
drivers compare the two.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config.settings import NumericError, settings
from src.core import Rng, Tensor, as_leaf, backward, mul, sum_all
from src.attention import (
    ALL_TARGETS,
    AttentionConfig,
    AttentionWeights,
    mhsa_reference,
    mohsa_forward,
    render_targets,
)
from src.models.vit import ModelConfig, forward, init_weights, loss

Matrix = List[List[float]]

REL_FLOOR = 1e-8
GRAD_REL_FLOOR = 1e-5
FORWARD_TOLERANCE = 1e-5
LAYER_GRAD_TOLERANCE = 1e-4
MODEL_GRAD_TOLERANCE = 1e-3
MODEL_FORWARD_TOLERANCE = 1e-4


class GradcheckFailure(NumericError):
    """Analytic and numerical results disagree beyond tolerance."""
    pass


def relative_error(a, b, floor: float = REL_FLOOR) -> float:
    """max over elements of |a - b| / max(floor, |a| + |b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise NumericError(f"Cannot compare shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))


# ---------------------------------------------------------------------------
# Scalar loops
# ---------------------------------------------------------------------------

def _rows(x) -> Matrix:
    return [[float(v) for v in row] for row in (x.tolist() if hasattr(x, "tolist") else x)]


def _vector(x) -> List[float]:
    return [float(v) for v in (x.tolist() if hasattr(x, "tolist") else x)]


def _affine(x: Matrix, w: Matrix, b: Optional[List[float]]) -> Matrix:
    rows, inner, cols = len(x), len(w), len(w[0])
    out = []
    for t in range(rows):
        row = []
        for j in range(cols):
            acc = b[j] if b is not None else 0.0
            for i in range(inner):
                acc += x[t][i] * w[i][j]
            row.append(acc)
        out.append(row)
    return out


def naive_attention(q, k, v, d_k: Optional[int] = None) -> Matrix:
    """softmax(q k^T / sqrt(d_k)) v for one head, one row at a time."""
    q, k, v = _rows(q), _rows(k), _rows(v)
    d_k = d_k or len(q[0])
    out = []
    for qi in q:
        scores = []
        for kj in k:
            dot = 0.0
            for a, b in zip(qi, kj):
                dot += a * b
            scores.append(dot / math.sqrt(d_k))
        top = max(scores)
        weights = [math.exp(s - top) for s in scores]
        total = sum(weights)
        row = [0.0] * len(v[0])
        for weight, vj in zip(weights, v):
            for c, value in enumerate(vj):
                row[c] += weight / total * value
        out.append(row)
    return out


def _head_columns(qkv_row: List[float], offset: int, dim: int, start: int, width: int) -> List[float]:
    """Columns start .. start+width-1 of one dim-wide block, zero outside [0, dim)."""
    return [qkv_row[offset + c] if 0 <= c < dim else 0.0 for c in range(start, start + width)]


def _naive_mohsa_tokens(tokens: Matrix, weights: Dict[str, object], cfg: AttentionConfig) -> Matrix:
    d, h, hd = cfg.dim, cfg.heads, cfg.head_dim
    qk_o = cfg.overlap if "Q" in cfg.targets else 0
    v_o = cfg.overlap if "V" in cfg.targets else 0
    qk_width, v_width = hd + 2 * qk_o, hd + 2 * v_o
    d_k = qk_width if cfg.qk_scale == "widened" else hd

    b_qkv = _vector(weights["b_qkv"]) if weights.get("b_qkv") is not None else None
    b_proj = _vector(weights["b_proj"]) if weights.get("b_proj") is not None else None
    qkv = _affine(tokens, _rows(weights["w_qkv"]), b_qkv)

    merged = [[] for _ in tokens]
    for i in range(h):
        q = [_head_columns(row, 0, d, i * hd - qk_o, qk_width) for row in qkv]
        k = [_head_columns(row, d, d, i * hd - qk_o, qk_width) for row in qkv]
        v = [_head_columns(row, 2 * d, d, i * hd - v_o, v_width) for row in qkv]
        for t, row in enumerate(naive_attention(q, k, v, d_k)):
            merged[t].extend(row)
    return _affine(merged, _rows(weights["w_proj"]), b_proj)


def naive_mohsa(tokens, weights: Dict[str, object], cfg: AttentionConfig):
    """Overlapped attention on [T, dim] or [B, T, dim] tokens; weights keyed w_qkv, b_qkv, w_proj, b_proj."""
    data = tokens.tolist() if hasattr(tokens, "tolist") else tokens
    if data and data[0] and isinstance(data[0][0], list):
        return [_naive_mohsa_tokens(_rows(sample), weights, cfg) for sample in data]
    return _naive_mohsa_tokens(_rows(data), weights, cfg)


def _naive_layer_norm(x: Matrix, gamma: List[float], beta: List[float], eps: float) -> Matrix:
    out = []
    for row in x:
        mean = sum(row) / len(row)
        var = sum((v - mean) ** 2 for v in row) / len(row)
        inv = 1.0 / math.sqrt(var + eps)
        out.append([(v - mean) * inv * g + b for v, g, b in zip(row, gamma, beta)])
    return out


def _naive_gelu(x: Matrix) -> Matrix:
    return [[v * 0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in row] for row in x]


def _naive_patches(image, patch: int) -> Matrix:
    """Row-major patches; vector index c*p*p + y*p + x."""
    channels, size = len(image), len(image[0])
    out = []
    for gy in range(size // patch):
        for gx in range(size // patch):
            vec = []
            for c in range(channels):
                for y in range(patch):
                    for x in range(patch):
                        vec.append(float(image[c][gy * patch + y][gx * patch + x]))
            out.append(vec)
    return out


def naive_vit_forward(images, arrays: Dict[str, np.ndarray], cfg: ModelConfig) -> Matrix:
    """Logits for a batch of [3, H, W] images, every layer as explicit loops."""
    p = lambda name: arrays[name]
    logits = []
    for image in (images.tolist() if hasattr(images, "tolist") else images):
        x = _affine(_naive_patches(image, cfg.patch_size), _rows(p("patch_embed.weight")), _vector(p("patch_embed.bias")))
        x = [_vector(p("cls_token"))] + x
        x = [[a + b for a, b in zip(row, pos)] for row, pos in zip(x, _rows(p("pos_embed")))]

        for layer in range(cfg.depth):
            prefix = f"blocks.{layer}"
            att = {name: arrays.get(f"{prefix}.attn.{name}") for name in ("w_qkv", "b_qkv", "w_proj", "b_proj")}
            h = _naive_layer_norm(x, _vector(p(prefix + ".norm1.weight")), _vector(p(prefix + ".norm1.bias")), cfg.ln_eps)
            h = _naive_mohsa_tokens(h, att, cfg.attention_config(layer))
            x = [[a + b for a, b in zip(r, s)] for r, s in zip(x, h)]
            h = _naive_layer_norm(x, _vector(p(prefix + ".norm2.weight")), _vector(p(prefix + ".norm2.bias")), cfg.ln_eps)
            h = _naive_gelu(_affine(h, _rows(p(prefix + ".mlp.fc1.weight")), _vector(p(prefix + ".mlp.fc1.bias"))))
            h = _affine(h, _rows(p(prefix + ".mlp.fc2.weight")), _vector(p(prefix + ".mlp.fc2.bias")))
            x = [[a + b for a, b in zip(r, s)] for r, s in zip(x, h)]

        x = _naive_layer_norm(x, _vector(p("norm.weight")), _vector(p("norm.bias")), cfg.ln_eps)
        logits.append(_affine([x[0]], _rows(p("head.weight")), _vector(p("head.bias")))[0])
    return logits


def naive_cross_entropy(logits, labels: Sequence[int], smoothing: float = 0.0) -> float:
    """Mean label-smoothed cross-entropy from explicit log-sum-exp."""
    rows = _rows(logits)
    total = 0.0
    for row, label in zip(rows, labels):
        top = max(row)
        log_z = top + math.log(sum(math.exp(v - top) for v in row))
        classes = len(row)
        for c, v in enumerate(row):
            target = smoothing / classes + (1.0 - smoothing if c == int(label) else 0.0)
            total -= target * (v - log_z)
    return total / len(rows)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def finite_diff(f: Callable[[], float], params: Dict[str, np.ndarray], eps: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Central differences of f() with respect to every scalar of `params`.

    Each array is perturbed in place and restored, so `f` must read the
    arrays themselves at call time.
    """
    eps = eps or settings.gradcheck_eps
    if not eps > 0:
        raise NumericError(f"finite_diff needs eps > 0, got {eps}")
    grads = {}
    for name, array in params.items():
        g = np.zeros(array.shape, dtype=np.float64)
        for idx in np.ndindex(array.shape):
            original = array[idx]
            array[idx] = original + eps
            up = f()
            array[idx] = original - eps
            down = f()
            array[idx] = original
            g[idx] = (up - down) / (2.0 * eps)
        grads[name] = g
    return grads


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

TARGET_SETS: Tuple[FrozenSet[str], ...] = (frozenset("QK"), frozenset("V"), ALL_TARGETS)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of attention configs: every (dim, heads) pair with o in {0, 1, hd//2, hd}."""
    token_counts: Tuple[int, ...] = (1, 3, 6)
    dims: Tuple[int, ...] = (6, 12)
    heads: Tuple[int, ...] = (1, 2, 3)
    targets: Tuple[FrozenSet[str], ...] = TARGET_SETS
    seeds: int = 1
    batch: int = 2

    def overlaps(self, head_dim: int) -> List[int]:
        return sorted({0, 1, head_dim // 2, head_dim} & set(range(head_dim + 1)))

    def cases(self) -> Iterator[Tuple[AttentionConfig, int, int]]:
        """(config, token count, seed) for every grid point."""
        for dim in self.dims:
            for h in self.heads:
                if dim % h:
                    continue
                for o in self.overlaps(dim // h):
                    for targets in self.targets:
                        for t in self.token_counts:
                            for seed in range(self.seeds):
                                yield AttentionConfig(dim=dim, heads=h, overlap=o, targets=targets), t, seed

    def __len__(self) -> int:
        return sum(1 for _ in self.cases())


SWEEPS = {
    "small": SweepSpec(),
    "smoke": SweepSpec(token_counts=(1, 3), dims=(6,)),
}


class CheckResult(NamedTuple):
    label: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


def describe(cfg: AttentionConfig, tokens: int, seed: int = 0) -> str:
    return f"dim={cfg.dim} h={cfg.heads} o={cfg.overlap} {render_targets(cfg.targets)} T={tokens} seed={seed}"


def _attention_case(cfg: AttentionConfig, tokens: int, seed: int, batch: int = 2, dtype=np.float64):
    rng = Rng(seed * 7919 + tokens)
    weights = AttentionWeights.initialize(cfg, rng.fork(0), std=0.3, dtype=dtype)
    x = as_leaf(rng.fork(1).normal((batch, tokens, cfg.dim)), dtype=dtype, name="tokens")
    return weights, x, rng.fork(2)


def _weight_dict(weights: AttentionWeights) -> Dict[str, np.ndarray]:
    return {name: t.data for name, t in weights.named_tensors()}


def forward_sweep(spec: SweepSpec) -> List[CheckResult]:
    """Engine mohsa_forward against naive_mohsa at 64-bit."""
    results = []
    for cfg, tokens, seed in spec.cases():
        weights, x, _ = _attention_case(cfg, tokens, seed, spec.batch)
        core = mohsa_forward(Tensor(x.data), weights, cfg).data
        oracle = naive_mohsa(x.data, _weight_dict(weights), cfg)
        results.append(CheckResult(describe(cfg, tokens, seed), relative_error(core, oracle), FORWARD_TOLERANCE))
    return results


def degeneracy_check(count: int = 50, seed: int = 0) -> List[CheckResult]:
    """o = 0 MOHSA against the reshape-based reference; tolerance 0 means bitwise."""
    rng = Rng(seed)
    results = []
    for case in range(count):
        heads = int(rng.integers(1, 5, 1)[0])
        dim = heads * int(rng.integers(1, 9, 1)[0])
        tokens = int(rng.integers(1, 9, 1)[0])
        cfg = AttentionConfig(dim=dim, heads=heads, overlap=0)
        weights, x, _ = _attention_case(cfg, tokens, case, dtype=np.float32)
        a = mohsa_forward(Tensor(x.data), weights, cfg).data
        b = mhsa_reference(Tensor(x.data), weights, cfg).data
        mismatches = int(np.count_nonzero(a != b))
        results.append(CheckResult(describe(cfg, tokens, case), float(mismatches), 0.5))
    return results


def gradcheck_attention(cfg: AttentionConfig, tokens: int, seed: int = 0, eps: Optional[float] = None) -> CheckResult:
    """All layer parameters and the input tokens, loss = sum(out * projection)."""
    weights, x, projection_rng = _attention_case(cfg, tokens, seed)
    projection = projection_rng.normal((x.shape[0], tokens, cfg.dim))

    backward(sum_all(mul(mohsa_forward(x, weights, cfg), projection)))
    analytic = {"tokens": x.grad}
    analytic.update({name: t.grad for name, t in weights.named_tensors()})

    params = {"tokens": x.data}
    params.update(_weight_dict(weights))
    plain = AttentionWeights(**{name: Tensor(a) for name, a in _weight_dict(weights).items()})

    def objective() -> float:
        return float(np.sum(mohsa_forward(Tensor(x.data), plain, cfg).data * projection))

    numeric = finite_diff(objective, params, eps)
    error = max(relative_error(analytic[name], numeric[name], GRAD_REL_FLOOR) for name in params)
    return CheckResult(describe(cfg, tokens, seed), error, LAYER_GRAD_TOLERANCE)


def gradcheck_sweep(spec: SweepSpec) -> List[CheckResult]:
    return [gradcheck_attention(cfg, tokens, seed) for cfg, tokens, seed in spec.cases()]


def toy_batch(cfg: ModelConfig, batch: int = 2, seed: int = 0):
    rng = Rng(seed)
    images = rng.fork(0).uniform((batch, 3, cfg.image_size, cfg.image_size))
    labels = rng.fork(1).integers(0, cfg.num_classes, batch)
    return images, labels


def gradcheck_model(cfg: ModelConfig, seed: int = 0, batch: int = 2, smoothing: float = 0.1,
                    eps: Optional[float] = None) -> List[CheckResult]:
    """Every parameter of a whole model against central differences of the training loss."""
    weights = init_weights(cfg, seed, dtype=np.float64)
    # Larger weights than the 0.02 init so no gradient is buried below the floor.
    rng = Rng(seed).fork(99)
    for name, t in weights.items():
        t.data += rng.normal(t.shape) * 0.2

    images, labels = toy_batch(cfg, batch, seed)
    backward(loss(forward(images, weights, cfg), labels, smoothing))
    plain = weights.detached()
    params = weights.arrays()

    def objective() -> float:
        return loss(forward(images, plain, cfg), labels, smoothing).item()

    numeric = finite_diff(objective, params, eps)
    return [CheckResult(name, relative_error(weights[name].grad, numeric[name], GRAD_REL_FLOOR), MODEL_GRAD_TOLERANCE)
            for name in params]


def model_forward_check(cfg: ModelConfig, seed: int = 0, batch: int = 2) -> CheckResult:
    """Engine forward at 64-bit against naive_vit_forward."""
    weights = init_weights(cfg, seed, dtype=np.float64)
    images, _ = toy_batch(cfg, batch, seed)
    core = forward(images, weights, cfg).data
    oracle = naive_vit_forward(images, weights.arrays(), cfg)
    return CheckResult(f"forward {cfg.image_size}/{cfg.patch_size} dim={cfg.dim} depth={cfg.depth}",
                       relative_error(core, oracle), MODEL_FORWARD_TOLERANCE)


def format_results(results: Sequence[CheckResult], title: str) -> str:
    """Pass/fail table, failures listed individually."""
    failures = [r for r in results if not r.passed]
    worst = max(results, key=lambda r: r.error / r.tolerance) if results else None
    lines = [f"{title}: {len(results) - len(failures)}/{len(results)} passed"]
    width = max([len(r.label) for r in results] + [5])
    for r in (results if len(results) <= 40 else failures):
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"  {status}  {r.label:<{width}}  err={r.error:.3e}  tol={r.tolerance:.0e}")
    if worst is not None:
        lines.append(f"  worst: {worst.label}  err={worst.error:.3e}")
    return "\n".join(lines)


def require_passed(results: Sequence[CheckResult], title: str):
    failures = [r for r in results if not r.passed]
    if failures:
        raise GradcheckFailure(f"{title}: {len(failures)} of {len(results)} checks failed; first: "
                               f"{failures[0].label} err={failures[0].error:.3e}")
