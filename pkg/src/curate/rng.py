"""Deterministic random streams shared across the engine.

Reproducibility across runs, worker counts, and implementations requires a
generator specified by algorithm rather than a library default. Everything
here is built on SplitMix64 (Steele et al.'s mix function): the state chain
is a +GOLDEN counter, each output one xor-shift-multiply mix of the state.
Because the state chain is a plain counter, bulk draws vectorize exactly:
output k of a stream seeded s is mix(s + k*GOLDEN).
"""

from __future__ import annotations

import math

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """Advance one SplitMix64 step; returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash, used to fold string keys into seeds."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & _MASK
    return h


def derive_seed(seed: int, *keys: str) -> int:
    """Mix a base seed with string keys into an independent stream seed."""
    state = seed & _MASK
    for key in keys:
        state, _ = splitmix64(state ^ fnv1a64(key.encode("utf-8")))
    return state


def _mix_array(states: np.ndarray) -> np.ndarray:
    z = states.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class SplitMix64:
    """Stateful SplitMix64 stream with uniform and Gaussian draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK
        self._spare: float | None = None

    def next_u64(self) -> int:
        self._state, out = splitmix64(self._state)
        return out

    def u64_array(self, n: int) -> np.ndarray:
        """Next n outputs as uint64, identical to n next_u64() calls."""
        ks = np.arange(1, n + 1, dtype=np.uint64)
        states = np.uint64(self._state) + ks * np.uint64(_GOLDEN)
        self._state = (self._state + n * _GOLDEN) & _MASK
        return _mix_array(states)

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def float_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)) * (1.0 / (1 << 53))

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via the 53-bit fixed-point path."""
        if n <= 0:
            raise ValueError("n must be positive")
        return ((self.next_u64() >> 11) * n) >> 53

    def next_gauss(self) -> float:
        return float(self.gauss_array(1)[0])

    def gauss_array(self, n: int) -> np.ndarray:
        """n i.i.d. standard normals (Box-Muller over the uniform stream).

        Each pair of uniforms (u1, u2) yields (r*cos, r*sin) with
        r = sqrt(-2 ln(1-u1)); the sin half of an odd draw is cached so
        consecutive calls consume one contiguous stream.
        """
        out = np.empty(n, dtype=np.float64)
        pos = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            pos = 1
        pairs = (n - pos + 1) // 2
        if pairs > 0:
            u = self.float_array(2 * pairs)
            r = np.sqrt(-2.0 * np.log(1.0 - u[0::2]))
            theta = 2.0 * math.pi * u[1::2]
            cos_half = r * np.cos(theta)
            sin_half = r * np.sin(theta)
            interleaved = np.empty(2 * pairs, dtype=np.float64)
            interleaved[0::2] = cos_half
            interleaved[1::2] = sin_half
            take = n - pos
            out[pos:] = interleaved[:take]
            if take < 2 * pairs:
                self._spare = float(interleaved[take])
        return out

    def shuffle_indices(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx
