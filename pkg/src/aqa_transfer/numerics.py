"""Seeded randomness and finite-difference helpers.

Every random draw in the library flows through :class:`Rng`, a
xoshiro256** generator seeded through splitmix64.  The stream for a
given seed is identical on every platform, so experiment runs are
reproducible from a single integer.

Matrices are plain float64 numpy arrays throughout the package.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ArgumentError, NumericError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (next_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** with splitmix64 seeding.

    Not safe to share across threads; derive independent substreams
    with :meth:`spawn` instead.
    """

    def __init__(self, seed: int):
        s = seed & _MASK64
        state = []
        for _ in range(4):
            s, v = _splitmix64(s)
            state.append(v)
        self._s = state

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ArgumentError("randbelow requires n > 0")
        limit = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def normal_block(self, n: int) -> np.ndarray:
        """n i.i.d. standard normal draws via Box-Muller."""
        if n < 0:
            raise ArgumentError("normal_block requires n >= 0")
        pairs = (n + 1) // 2
        u1 = np.empty(pairs)
        u2 = np.empty(pairs)
        for i in range(pairs):
            a = self.uniform()
            while a == 0.0:  # log(0) guard
                a = self.uniform()
            u1[i] = a
            u2[i] = self.uniform()
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal(self) -> float:
        return float(self.normal_block(1)[0])

    def spawn(self) -> "Rng":
        """Independent substream derived from this generator's output."""
        return Rng(self.next_u64())


def gaussian_fill(shape: tuple[int, ...], std: float, rng: Rng) -> np.ndarray:
    """Array of i.i.d. N(0, std^2) draws from the fixed generator."""
    if std < 0:
        raise ArgumentError(f"std must be >= 0, got {std}")
    n = int(np.prod(shape)) if shape else 1
    if std == 0:
        return np.zeros(shape)
    out = std * rng.normal_block(n)
    return out.reshape(shape)


def central_diff(f, x: float, h: float) -> float:
    """Symmetric difference quotient (f(x+h) - f(x-h)) / (2h)."""
    if h <= 0:
        raise ArgumentError(f"h must be > 0, got {h}")
    hi = f(x + h)
    lo = f(x - h)
    if not (math.isfinite(hi) and math.isfinite(lo)):
        raise NumericError(f"non-finite function value near x={x}")
    return (hi - lo) / (2.0 * h)


def ensure_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {name}")
    return arr
