"""Portable deterministic random numbers.

All randomized fixtures in this package draw from SplitMix64, a 64-bit
counter-based generator (Steele, Lea & Flood, 2014).  Output k of a
stream seeded with s is a pure function of (s, k):

    state_k = (s + (k + 1) * 0x9E3779B97F4A7C15) mod 2^64
    mix(z)  = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
              z ^= z >> 27; z *= 0x94D049BB133111EB;
              z ^= z >> 31

so identical seeds give bit-identical streams on every platform and the
stream can be evaluated in vectorized chunks.  Uniform doubles take the
top 53 bits of each output, giving values in [0, 1).
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential view over the counter-based SplitMix64 stream for a seed.

    Any Python integer is accepted as seed; it is reduced modulo 2^64.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._drawn = 0

    def next_uint64(self, count: int) -> np.ndarray:
        """Next `count` raw 64-bit outputs as a uint64 array."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        idx = np.arange(self._drawn + 1, self._drawn + count + 1, dtype=np.uint64)
        self._drawn += count
        with np.errstate(over="ignore"):
            return _mix(self._seed + idx * _GAMMA)

    def uniform(self, count: int) -> np.ndarray:
        """Next `count` doubles uniform on [0, 1)."""
        bits = self.next_uint64(count) >> np.uint64(11)
        return bits.astype(np.float64) * _INV_2_53

    def uniform_signed(self, count: int) -> np.ndarray:
        """Next `count` doubles uniform on [-1, 1)."""
        return self.uniform(count) * 2.0 - 1.0


def derive_seed(seed: int, stream: int) -> int:
    """Decorrelated child seed for an auxiliary stream.

    Mixes the stream index into the parent seed through one SplitMix64
    step so per-shot / per-component streams never overlap.
    """
    rng = SplitMix64((int(seed) ^ (int(stream) * 0x9E3779B97F4A7C15)) & _U64_MASK)
    return int(rng.next_uint64(1)[0])
