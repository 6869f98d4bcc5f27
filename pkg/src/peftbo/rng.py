"""Deterministic seed derivation.

One master seed fans out into independent streams through a counter scheme:
every consumer derives its generator from ``(master, stream_tag, *indices)``
so replaying any prefix of a run reproduces the exact same draws without
carrying mutable RNG state around.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 63) - 1


def _clean(parts: tuple[int, ...]) -> list[int]:
    return [int(p) & _MASK for p in parts]


def derive_seed(*parts: int) -> int:
    """Collapse a seed path into a single non-negative integer seed."""
    ss = np.random.SeedSequence(_clean(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(*parts: int) -> np.random.Generator:
    """Fresh generator for the given seed path."""
    return np.random.default_rng(np.random.SeedSequence(_clean(parts)))
