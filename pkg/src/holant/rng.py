"""Seed splitting and counter-based random streams.

Every random draw in the package comes from ``stream(seed, index)``: a numpy
``Philox4x64-10`` generator (a counter-based design with published constants,
so streams are reproducible bit for bit on every platform) keyed by
``split_seed(seed, index)``.

``split_seed`` is the SplitMix64 finalizer applied to
``seed + (index + 1) * 0x9E3779B97F4A7C15`` (mod 2**64)::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, index: int) -> int:
    """64-bit seed for sub-stream ``index`` of master ``seed``."""
    return mix64((seed & MASK64) + (index + 1) * GOLDEN_GAMMA)


def stream(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=split_seed(seed, index)))
