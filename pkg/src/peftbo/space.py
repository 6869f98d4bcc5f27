"""Combinatorial search space over per-layer PEFT insertion choices.

A configuration toggles a PEFT block on or off in each transformer layer and
picks one size per module family from a shared discrete grid: the serial
bottleneck width, the parallel bottleneck width, and the number of learned
prefix rows. Size 0 means the module is absent. The grid is binary
logarithmic: 0, 1, then doublings of ``hidden_dim / 256`` up to the full
hidden dimension, which gives 11 levels for the standard 768- and 1024-wide
models.

Encoded points are plain float64 vectors of length ``num_layers + 3`` with
every coordinate in [0, 1]: layer bits stay 0/1 and each size maps to its
grid index divided by ``len(size_grid) - 1``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import EncodingError, InvalidConfigurationError

_GRID_TOL = 1e-6


@dataclass(frozen=True)
class SearchSpaceSpec:
    """Static description of one search space.

    ``base_param_count`` is the pretrained-model total used as the
    denominator when reporting trainable-parameter fractions.
    """

    num_layers: int
    hidden_dim: int
    size_grid: tuple[int, ...]
    base_param_count: int

    def __post_init__(self):
        object.__setattr__(self, "size_grid", tuple(int(v) for v in self.size_grid))
        if self.num_layers < 1:
            raise InvalidConfigurationError("num_layers must be >= 1")
        if self.hidden_dim < 1:
            raise InvalidConfigurationError("hidden_dim must be >= 1")
        if self.base_param_count < 1:
            raise InvalidConfigurationError("base_param_count must be positive")
        grid = self.size_grid
        if len(grid) < 2 or grid[0] != 0 or grid[-1] != self.hidden_dim:
            raise InvalidConfigurationError(
                "size_grid must start at 0 and end at hidden_dim"
            )
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidConfigurationError("size_grid must be strictly increasing")

    @property
    def encoded_dim(self) -> int:
        return self.num_layers + 3

    def grid_index(self, size: int) -> int:
        try:
            return self.size_grid.index(size)
        except ValueError:
            raise InvalidConfigurationError(
                f"size {size} not on grid {self.size_grid}"
            ) from None

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "hidden_dim": self.hidden_dim,
            "size_grid": list(self.size_grid),
            "base_param_count": self.base_param_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpaceSpec":
        try:
            return cls(
                num_layers=int(data["num_layers"]),
                hidden_dim=int(data["hidden_dim"]),
                size_grid=tuple(int(v) for v in data["size_grid"]),
                base_param_count=int(data["base_param_count"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfigurationError(f"bad space spec: {exc}") from exc


def halving_size_grid(hidden_dim: int) -> tuple[int, ...]:
    """0, 1, then hidden_dim/256 doubled up to hidden_dim (11 levels)."""
    if hidden_dim % 256 != 0:
        raise InvalidConfigurationError("hidden_dim must be a multiple of 256")
    return tuple([0, 1] + [hidden_dim >> k for k in range(8, -1, -1)])


def bert_base_space() -> SearchSpaceSpec:
    return SearchSpaceSpec(
        num_layers=12,
        hidden_dim=768,
        size_grid=halving_size_grid(768),
        base_param_count=109_482_240,
    )


def roberta_large_space() -> SearchSpaceSpec:
    return SearchSpaceSpec(
        num_layers=24,
        hidden_dim=1024,
        size_grid=halving_size_grid(1024),
        base_param_count=355_359_744,
    )


PRESETS = {
    "bert-base": bert_base_space,
    "roberta-large": roberta_large_space,
}


@dataclass(frozen=True)
class Configuration:
    """One point in the search space.

    ``layer_mask`` holds one 0/1 entry per layer (index 0 is layer 1);
    sizes must be members of the owning spec's grid.
    """

    layer_mask: tuple[int, ...]
    d_sa: int
    d_pa: int
    l_pt: int

    def __post_init__(self):
        object.__setattr__(self, "layer_mask", tuple(int(b) for b in self.layer_mask))
        if any(b not in (0, 1) for b in self.layer_mask):
            raise InvalidConfigurationError("layer_mask entries must be 0 or 1")

    @property
    def active_layers(self) -> tuple[int, ...]:
        """1-indexed layers with PEFT modules enabled."""
        return tuple(i + 1 for i, b in enumerate(self.layer_mask) if b)

    @property
    def num_active(self) -> int:
        return sum(self.layer_mask)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.d_sa, self.d_pa, self.l_pt)

    def to_dict(self) -> dict:
        return {
            "layers": list(self.active_layers),
            "d_sa": self.d_sa,
            "d_pa": self.d_pa,
            "l_pt": self.l_pt,
        }

    @classmethod
    def from_dict(cls, data: dict, num_layers: int) -> "Configuration":
        try:
            layers = [int(v) for v in data["layers"]]
            d_sa, d_pa, l_pt = int(data["d_sa"]), int(data["d_pa"]), int(data["l_pt"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfigurationError(f"bad configuration record: {exc}") from exc
        if len(set(layers)) != len(layers):
            raise InvalidConfigurationError(f"duplicate layers in {layers}")
        if any(l < 1 or l > num_layers for l in layers):
            raise InvalidConfigurationError(
                f"layers {layers} out of range 1..{num_layers}"
            )
        mask = [0] * num_layers
        for l in layers:
            mask[l - 1] = 1
        return cls(tuple(mask), d_sa, d_pa, l_pt)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def stable_hash(config: Configuration) -> int:
    """Process-independent 63-bit hash of a configuration."""
    digest = hashlib.blake2b(config.canonical_json().encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def validate(spec: SearchSpaceSpec, config: Configuration) -> None:
    if len(config.layer_mask) != spec.num_layers:
        raise InvalidConfigurationError(
            f"layer_mask length {len(config.layer_mask)} != num_layers {spec.num_layers}"
        )
    for size in config.sizes:
        spec.grid_index(size)


def empty_configuration(spec: SearchSpaceSpec) -> Configuration:
    return Configuration((0,) * spec.num_layers, 0, 0, 0)


def full_configuration(spec: SearchSpaceSpec) -> Configuration:
    d = spec.hidden_dim
    return Configuration((1,) * spec.num_layers, d, d, d)


def cardinality(spec: SearchSpaceSpec) -> int:
    """Total number of configurations: 2^layers * grid^3."""
    return (1 << spec.num_layers) * len(spec.size_grid) ** 3


def param_count(spec: SearchSpaceSpec, config: Configuration) -> int:
    """Trainable parameters added by ``config``.

    Each active layer contributes two projection matrices per bottleneck
    (2 * hidden * width) and two prefix row blocks (2 * rows * hidden);
    biases and layer norms are not counted.
    """
    validate(spec, config)
    size_sum = config.d_sa + config.d_pa + config.l_pt
    return config.num_active * 2 * spec.hidden_dim * size_sum


def param_fraction(spec: SearchSpaceSpec, config: Configuration) -> float:
    return param_count(spec, config) / spec.base_param_count


def encode(spec: SearchSpaceSpec, config: Configuration) -> np.ndarray:
    """Map a configuration to a float vector in [0, 1]^(num_layers + 3)."""
    validate(spec, config)
    denom = len(spec.size_grid) - 1
    coords = np.empty(spec.encoded_dim)
    coords[: spec.num_layers] = config.layer_mask
    coords[spec.num_layers :] = [spec.grid_index(s) / denom for s in config.sizes]
    return coords


def decode(spec: SearchSpaceSpec, coords: np.ndarray) -> Configuration:
    """Inverse of :func:`encode`; rejects off-grid coordinates."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (spec.encoded_dim,):
        raise EncodingError(
            f"expected shape ({spec.encoded_dim},), got {coords.shape}"
        )
    mask = []
    for i, v in enumerate(coords[: spec.num_layers]):
        bit = round(v)
        if bit not in (0, 1) or abs(v - bit) > _GRID_TOL:
            raise EncodingError(f"coordinate {i} = {v} is not a 0/1 layer bit")
        mask.append(bit)
    denom = len(spec.size_grid) - 1
    sizes = []
    for j, v in enumerate(coords[spec.num_layers :]):
        idx = round(v * denom)
        if idx < 0 or idx > denom or abs(v - idx / denom) > _GRID_TOL:
            raise EncodingError(f"size coordinate {v} is off the grid")
        sizes.append(spec.size_grid[idx])
    return Configuration(tuple(mask), *sizes)


def neighbors(spec: SearchSpaceSpec, config: Configuration) -> list[Configuration]:
    """All configurations one move away: a single bit flip or one grid step.

    Symmetric (``b in neighbors(a)`` iff ``a in neighbors(b)``) and never
    includes the input itself.
    """
    validate(spec, config)
    out = []
    mask = list(config.layer_mask)
    for i in range(spec.num_layers):
        flipped = mask.copy()
        flipped[i] ^= 1
        out.append(Configuration(tuple(flipped), *config.sizes))
    top = len(spec.size_grid) - 1
    sizes = list(config.sizes)
    for j in range(3):
        idx = spec.grid_index(sizes[j])
        for step in (-1, 1):
            if 0 <= idx + step <= top:
                moved = sizes.copy()
                moved[j] = spec.size_grid[idx + step]
                out.append(Configuration(config.layer_mask, *moved))
    return out


def _draw(spec: SearchSpaceSpec, rng: np.random.Generator) -> Configuration:
    mask = tuple(int(b) for b in rng.integers(0, 2, spec.num_layers))
    grid = spec.size_grid
    picks = rng.integers(0, len(grid), 3)
    return Configuration(mask, grid[picks[0]], grid[picks[1]], grid[picks[2]])


def random_sample(spec: SearchSpaceSpec, rng_seed: int, n: int) -> list[Configuration]:
    """``n`` independent uniform draws (bits fair coins, sizes uniform on grid)."""
    if n < 0:
        raise InvalidConfigurationError("n must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(int(rng_seed) & ((1 << 63) - 1)))
    return [_draw(spec, rng) for _ in range(n)]


def enumerate_all(spec: SearchSpaceSpec) -> Iterator[Configuration]:
    """Lazily yield every configuration; only sensible for small spaces."""
    grid = spec.size_grid
    n = spec.num_layers
    for mask_bits in range(1 << n):
        mask = tuple((mask_bits >> i) & 1 for i in range(n))
        for d_sa in grid:
            for d_pa in grid:
                for l_pt in grid:
                    yield Configuration(mask, d_sa, d_pa, l_pt)
