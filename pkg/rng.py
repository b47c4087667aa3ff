# -*- coding: utf-8 -*-
"""
reproducible random streams for rollouts

xorshift64* (Vigna):
    s ^= s >> 12; s ^= s << 25; s ^= s >> 27
    out = s * 2685821657736338717  (mod 2^64)
    uniform = (out >> 11) * 2^-53
seeding uses the splitmix64 finalizer; stream i of a seed starts at
    mix(seed + (i + 1) * 0x9E3779B97F4A7C15)
with a zero state replaced by the golden constant. the python-int step
functions and the numpy batch give identical numbers.
"""
from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB
XS_MULT = 2685821657736338717
TWO_M53 = 1.0 / 9007199254740992.0

_U = np.uint64


def splitmix64_mix(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def stream_state(seed: int, index: int = 0) -> int:
    state = splitmix64_mix((int(seed) + (int(index) + 1) * GOLDEN) & MASK64)
    return state or GOLDEN


def xorshift64star_step(state: int) -> tuple[int, int]:
    """one step: (new state, 64-bit output)"""
    s = state & MASK64
    s ^= s >> 12
    s ^= (s << 25) & MASK64
    s ^= s >> 27
    return s, (s * XS_MULT) & MASK64


def to_unit(output: int) -> float:
    return (output >> 11) * TWO_M53


class StreamBatch:
    """one xorshift64* stream per sample, advanced in lockstep"""

    def __init__(self, seed: int, count: int, first_index: int = 0):
        if count < 1:
            raise ValueError("a stream batch needs at least one stream")
        self._seed = int(seed) & MASK64
        idx = np.arange(first_index, first_index + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = _U(self._seed) + (idx + _U(1)) * _U(GOLDEN)
            z = (z ^ (z >> _U(30))) * _U(MIX_A)
            z = (z ^ (z >> _U(27))) * _U(MIX_B)
            z = z ^ (z >> _U(31))
        z[z == 0] = _U(GOLDEN)
        self._state = z

    @property
    def seed(self) -> int:
        return self._seed

    def __len__(self) -> int:
        return len(self._state)

    def uniform(self) -> np.ndarray:
        """next double in [0, 1) from every stream"""
        s = self._state
        with np.errstate(over="ignore"):
            s = s ^ (s >> _U(12))
            s = s ^ (s << _U(25))
            s = s ^ (s >> _U(27))
            out = s * _U(XS_MULT)
        self._state = s
        return (out >> _U(11)).astype(np.float64) * TWO_M53


def sample_actions(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """inverse-cdf draw; actions with zero probability are never returned"""
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(idx, len(cdf) - 1)
