"""Dense reference implementation of the PEFT module math.

Desk-scale, numpy-only versions of the three module families: a serial
bottleneck applied to the FFN output, a parallel bottleneck applied to the
FFN input, and learned prefix rows prepended to attention keys and values.
Serves as the counting oracle for :mod:`peftbo.space` and as the ground
truth for the composed forward form.

No attention scores are computed here; prefix handling stops at the K/V
concatenation, which is all the module-level contracts need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import space as _space
from .errors import DimensionError
from .space import Configuration, SearchSpaceSpec


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class BottleneckWeights:
    """Down/up projection pair for one bottleneck module."""

    w_down: np.ndarray  # (hidden, width)
    w_up: np.ndarray    # (width, hidden)

    def __post_init__(self):
        object.__setattr__(self, "w_down", _as_matrix(self.w_down, "w_down"))
        object.__setattr__(self, "w_up", _as_matrix(self.w_up, "w_up"))
        if self.w_down.shape[1] != self.w_up.shape[0]:
            raise DimensionError(
                f"bottleneck widths disagree: {self.w_down.shape} vs {self.w_up.shape}"
            )
        if self.w_down.shape[0] != self.w_up.shape[1]:
            raise DimensionError(
                f"hidden dims disagree: {self.w_down.shape} vs {self.w_up.shape}"
            )

    @property
    def hidden_dim(self) -> int:
        return self.w_down.shape[0]

    @property
    def width(self) -> int:
        return self.w_down.shape[1]

    @property
    def entry_count(self) -> int:
        return self.w_down.size + self.w_up.size


@dataclass(frozen=True)
class PrefixWeights:
    """Learned key/value rows prepended to the attention inputs."""

    p_k: np.ndarray  # (length, hidden)
    p_v: np.ndarray  # (length, hidden)

    def __post_init__(self):
        object.__setattr__(self, "p_k", _as_matrix(self.p_k, "p_k"))
        object.__setattr__(self, "p_v", _as_matrix(self.p_v, "p_v"))
        if self.p_k.shape != self.p_v.shape:
            raise DimensionError(
                f"p_k shape {self.p_k.shape} != p_v shape {self.p_v.shape}"
            )

    @property
    def length(self) -> int:
        return self.p_k.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.p_k.shape[1]

    @property
    def entry_count(self) -> int:
        return self.p_k.size + self.p_v.size


def serial_forward(h: np.ndarray, w: BottleneckWeights) -> np.ndarray:
    """max(0, h @ w_down) @ w_up applied to FFN-output states ``h``."""
    h = _as_matrix(h, "h")
    if h.shape[1] != w.hidden_dim:
        raise DimensionError(
            f"input width {h.shape[1]} != hidden dim {w.hidden_dim}"
        )
    return np.maximum(h @ w.w_down, 0.0) @ w.w_up


def parallel_forward(x: np.ndarray, w: BottleneckWeights) -> np.ndarray:
    """Same functional form as :func:`serial_forward`, fed the FFN input."""
    return serial_forward(x, w)


def sapa_forward(
    x: np.ndarray,
    ffn: Callable[[np.ndarray], np.ndarray],
    w_sa: BottleneckWeights,
    w_pa: BottleneckWeights,
) -> np.ndarray:
    """Composed adapter output: serial path on ffn(x) plus parallel path on x."""
    x = _as_matrix(x, "x")
    h = np.asarray(ffn(x), dtype=float)
    if h.shape != x.shape:
        raise DimensionError(f"ffn changed shape {x.shape} -> {h.shape}")
    return serial_forward(h, w_sa) + parallel_forward(x, w_pa)


def prefix_extend(
    k: np.ndarray, v: np.ndarray, p: PrefixWeights
) -> tuple[np.ndarray, np.ndarray]:
    """Prepend learned rows to keys and values, preserving the originals."""
    k = _as_matrix(k, "k")
    v = _as_matrix(v, "v")
    if k.shape[1] != v.shape[1]:
        raise DimensionError(f"k width {k.shape[1]} != v width {v.shape[1]}")
    if p.length and p.hidden_dim != k.shape[1]:
        raise DimensionError(
            f"prefix width {p.hidden_dim} != key/value width {k.shape[1]}"
        )
    return np.vstack([p.p_k, k]), np.vstack([p.p_v, v])


@dataclass(frozen=True)
class LayerWeights:
    """Materialized module weights for one active layer."""

    serial: BottleneckWeights
    parallel: BottleneckWeights
    prefix: PrefixWeights

    @property
    def entry_count(self) -> int:
        return (
            self.serial.entry_count
            + self.parallel.entry_count
            + self.prefix.entry_count
        )


def build_weights(
    spec: SearchSpaceSpec, config: Configuration, rng_seed: int = 0
) -> list[LayerWeights]:
    """Instantiate uniform(-0.5, 0.5) weights for every active layer."""
    _space.validate(spec, config)
    rng = np.random.default_rng(rng_seed)
    d_h = spec.hidden_dim
    out = []
    for _ in range(config.num_active):
        out.append(
            LayerWeights(
                serial=BottleneckWeights(
                    rng.uniform(-0.5, 0.5, (d_h, config.d_sa)),
                    rng.uniform(-0.5, 0.5, (config.d_sa, d_h)),
                ),
                parallel=BottleneckWeights(
                    rng.uniform(-0.5, 0.5, (d_h, config.d_pa)),
                    rng.uniform(-0.5, 0.5, (config.d_pa, d_h)),
                ),
                prefix=PrefixWeights(
                    rng.uniform(-0.5, 0.5, (config.l_pt, d_h)),
                    rng.uniform(-0.5, 0.5, (config.l_pt, d_h)),
                ),
            )
        )
    return out


def count_weights(
    spec: SearchSpaceSpec, config: Configuration, rng_seed: int = 0
) -> int:
    """Count scalar entries of the actually-instantiated weight matrices."""
    return sum(lw.entry_count for lw in build_weights(spec, config, rng_seed))
