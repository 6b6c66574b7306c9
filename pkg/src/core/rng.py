"""
Deterministic random streams for initialization, shuffling and augmentation.

The generator is counter-based splitmix64. With GAMMA = 0x9E3779B97F4A7C15 and
all arithmetic modulo 2**64:

    mix(z):  z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
             z ^= z >> 27;  z *= 0x94D049BB133111EB
             z ^= z >> 31

    state    = mix(seed mod 2**64)
    draw k   = mix(state + (k + 1) * GAMMA)        k = 0, 1, 2, ...

Uniforms are (draw >> 11) * 2**-53 in [0, 1). Normals use Box-Muller on
consecutive uniform pairs (u1, u2): r = sqrt(-2 ln(1 - u1)), emitting
r cos(2 pi u2) then r sin(2 pi u2). Integer draws are identical on every
platform; normals inherit the platform libm's last-ulp behaviour.
"""

from typing import Sequence, Tuple, Union

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

Shape = Union[int, Sequence[int]]


def mix64(z: int) -> int:
    """Scalar splitmix64 finalizer on Python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def _as_shape(shape: Shape) -> Tuple[int, ...]:
    return (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)


class Rng:
    """Seeded stream of 64-bit draws."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = mix64(self.seed)
        self.counter = 0

    def fork(self, tag: int) -> "Rng":
        """Independent stream keyed by `tag`; does not advance this one."""
        child = Rng.__new__(Rng)
        child.seed = self.seed
        child.state = mix64(self.state ^ mix64((int(tag) + 1) * GAMMA))
        child.counter = 0
        return child

    def next_u64(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over='ignore'):
            z = np.uint64(self.state) + ks * np.uint64(GAMMA)
            return _mix64_array(z)

    def uniform(self, shape: Shape) -> np.ndarray:
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape)

    def normal(self, shape: Shape) -> np.ndarray:
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)

    def truncated_normal(self, shape: Shape, std: float = 1.0, bound: float = 2.0) -> np.ndarray:
        """N(0, std^2) redrawn until |z| <= bound * std, filled in index order."""
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        out = np.empty(n, dtype=np.float64)
        filled = 0
        while filled < n:
            z = self.normal(n - filled)
            z = z[np.abs(z) <= bound]
            out[filled:filled + z.size] = z
            filled += z.size
        return (out * std).reshape(shape)

    def integers(self, low: int, high: int, shape: Shape) -> np.ndarray:
        """Uniform integers in [low, high)."""
        span = high - low
        return low + np.floor(self.uniform(shape) * span).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")
