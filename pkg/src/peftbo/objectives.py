"""Evaluation backends returning (score, cost) for a configuration.

Three interchangeable backends share one contract: ``evaluate(backend,
config, fidelity, seed) -> Observation``. The synthetic landscape is a
deterministic closed-form stand-in for fine-tuning, the tabular backend
replays a benchmark file, and the worker backend delegates to an external
process over a line-delimited stdio protocol.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from . import space as _space
from .errors import (
    BenchmarkError,
    BenchmarkMissError,
    EvaluationError,
    InvalidConfigurationError,
)
from .space import Configuration, SearchSpaceSpec, stable_hash


@dataclass(frozen=True)
class Observation:
    """One evaluated configuration.

    ``fidelity`` is the fraction of full training used (1.0 = full run);
    ``cost`` is the trainable-parameter fraction in [0, 1].
    """

    config: Configuration
    score: float
    cost: float
    fidelity: float
    seed: int
    wall_time_s: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.fidelity <= 1.0):
            raise InvalidConfigurationError(
                f"fidelity {self.fidelity} outside (0, 1]"
            )
        if not math.isfinite(self.score):
            raise InvalidConfigurationError(f"non-finite score {self.score}")
        if not (0.0 <= self.cost <= 1.0):
            raise InvalidConfigurationError(f"cost {self.cost} outside [0, 1]")
        if self.wall_time_s < 0:
            raise InvalidConfigurationError("wall_time_s must be >= 0")

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "score": self.score,
            "cost": self.cost,
            "fidelity": self.fidelity,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, data: dict, num_layers: int) -> "Observation":
        return cls(
            config=Configuration.from_dict(data["config"], num_layers),
            score=float(data["score"]),
            cost=float(data["cost"]),
            fidelity=float(data["fidelity"]),
            seed=int(data["seed"]),
            wall_time_s=float(data.get("wall_time_s", 0.0)),
        )


@dataclass(frozen=True)
class SyntheticLandscapeSpec:
    """Deterministic synthetic score landscape.

    Per-layer weights carry a sparse relevance pattern: a configurable
    fraction of layers get near-zero weight so that only a few input
    dimensions drive the score, mirroring the regime the surrogate's
    shrinkage priors are built for.
    """

    landscape_seed: int
    layer_weights: tuple[float, ...]
    noise_sd: float = 0.2
    c_sa: float = 1.0
    c_pa: float = 0.6
    c_pt: float = 0.8

    def __post_init__(self):
        object.__setattr__(
            self, "layer_weights", tuple(float(w) for w in self.layer_weights)
        )
        if self.noise_sd < 0:
            raise InvalidConfigurationError("noise_sd must be >= 0")

    @classmethod
    def from_seed(
        cls,
        num_layers: int,
        landscape_seed: int,
        noise_sd: float = 0.2,
        near_zero_fraction: float = 0.5,
        c_sa: float = 1.0,
        c_pa: float = 0.6,
        c_pt: float = 0.8,
    ) -> "SyntheticLandscapeSpec":
        """Draw layer weights: relevant ~ U(0.5, 1.5), the rest near zero."""
        gen = _rng.generator(landscape_seed)
        n_zero = int(round(near_zero_fraction * num_layers))
        strong = gen.uniform(0.5, 1.5, num_layers)
        weak = gen.uniform(1e-3, 1e-2, num_layers)
        zero_positions = set(gen.permutation(num_layers)[:n_zero].tolist())
        weights = tuple(
            weak[i] if i in zero_positions else strong[i] for i in range(num_layers)
        )
        return cls(
            landscape_seed=landscape_seed,
            layer_weights=weights,
            noise_sd=noise_sd,
            c_sa=c_sa,
            c_pa=c_pa,
            c_pt=c_pt,
        )


def size_utility(spec: SearchSpaceSpec, landscape, d_sa: int, d_pa: int, l_pt: int) -> float:
    """Saturating per-layer utility of the three module sizes."""
    denom = math.log2(1 + spec.hidden_dim)

    def g(v):
        return math.log2(1 + v) / denom

    return landscape.c_sa * g(d_sa) + landscape.c_pa * g(d_pa) + landscape.c_pt * g(l_pt)


def synthetic_mean_score(
    spec: SearchSpaceSpec, landscape: SyntheticLandscapeSpec, config: Configuration
) -> float:
    """Noise-free score: 100 * s / (1 + s) with s the mask-weighted utility."""
    _space.validate(spec, config)
    if len(landscape.layer_weights) != spec.num_layers:
        raise InvalidConfigurationError(
            "landscape weights do not match the space's layer count"
        )
    util = size_utility(spec, landscape, *config.sizes)
    s = sum(
        w for w, bit in zip(landscape.layer_weights, config.layer_mask) if bit
    ) * util
    return 100.0 * s / (1.0 + s)


def synthetic_score(
    spec: SearchSpaceSpec,
    landscape: SyntheticLandscapeSpec,
    config: Configuration,
    fidelity: float,
    seed: int,
) -> float:
    """Mean score plus Gaussian noise with variance noise_sd^2 / sqrt(fidelity)."""
    mean = synthetic_mean_score(spec, landscape, config)
    if landscape.noise_sd == 0.0:
        return mean
    sd = landscape.noise_sd / fidelity**0.25
    eps = _rng.generator(
        landscape.landscape_seed, seed, stable_hash(config)
    ).normal(0.0, sd)
    return mean + eps


class TabularBenchmark:
    """Score lookup keyed by canonical configuration text form."""

    def __init__(self):
        self._records: dict[tuple, tuple[float, float | None]] = {}

    @staticmethod
    def _key(config: Configuration) -> tuple:
        return (config.active_layers, config.d_sa, config.d_pa, config.l_pt)

    def __len__(self) -> int:
        return len(self._records)

    def add(self, config: Configuration, score: float, cost: float | None = None) -> None:
        key = self._key(config)
        if key in self._records:
            raise BenchmarkError(f"duplicate benchmark key {config.to_dict()}")
        self._records[key] = (float(score), None if cost is None else float(cost))

    def lookup(self, config: Configuration) -> tuple[float, float | None]:
        try:
            return self._records[self._key(config)]
        except KeyError:
            raise BenchmarkMissError(
                f"configuration {config.canonical_json()} not in benchmark"
            ) from None


def load_tabular(path) -> TabularBenchmark:
    """Parse a line-delimited benchmark file: {config, score, cost?} per line."""
    bench = TabularBenchmark()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BenchmarkError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            try:
                raw = record["config"]
                layers = sorted(int(v) for v in raw["layers"])
                config = Configuration(
                    # Mask length = max referenced layer; only the canonical
                    # key (active layers + sizes) matters for lookup.
                    tuple(
                        1 if i + 1 in set(layers) else 0
                        for i in range(max(layers) if layers else 0)
                    ),
                    int(raw["d_sa"]),
                    int(raw["d_pa"]),
                    int(raw["l_pt"]),
                )
                score = float(record["score"])
                cost = record.get("cost")
            except (KeyError, TypeError, ValueError) as exc:
                raise BenchmarkError(f"line {lineno}: bad record ({exc})") from exc
            try:
                bench.add(config, score, cost)
            except BenchmarkError as exc:
                raise BenchmarkError(f"line {lineno}: {exc}") from exc
    return bench


class SyntheticBackend:
    """Closed-form landscape; pure given (config, fidelity, seed)."""

    def __init__(self, space: SearchSpaceSpec, landscape: SyntheticLandscapeSpec):
        self.space = space
        self.landscape = landscape

    def evaluate(self, config: Configuration, fidelity: float, seed: int) -> Observation:
        t0 = time.perf_counter()
        score = synthetic_score(self.space, self.landscape, config, fidelity, seed)
        return Observation(
            config=config,
            score=score,
            cost=_space.param_fraction(self.space, config),
            fidelity=fidelity,
            seed=seed,
            wall_time_s=time.perf_counter() - t0,
        )


class TabularBackend:
    """Replays a benchmark file; misses raise :class:`BenchmarkMissError`."""

    def __init__(self, space: SearchSpaceSpec, benchmark: TabularBenchmark):
        self.space = space
        self.benchmark = benchmark

    def evaluate(self, config: Configuration, fidelity: float, seed: int) -> Observation:
        t0 = time.perf_counter()
        score, cost = self.benchmark.lookup(config)
        if cost is None:
            cost = _space.param_fraction(self.space, config)
        return Observation(
            config=config,
            score=score,
            cost=cost,
            fidelity=fidelity,
            seed=seed,
            wall_time_s=time.perf_counter() - t0,
        )


class WorkerBackend:
    """Client for an external evaluation worker on stdio.

    Requests are newline-delimited JSON objects {id, config, fidelity, seed};
    responses echo the id and carry either a score (plus optional cost) or an
    error message. Requests on one connection are serialized; parallelism
    comes from running several workers.
    """

    def __init__(self, space: SearchSpaceSpec, command, timeout_s: float = 600.0):
        self.space = space
        self._argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout_s = timeout_s
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()
        self._next_id = 0

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self._argv,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise EvaluationError(f"cannot start worker {self._argv}: {exc}") from exc
        return self._proc

    def _read_line(self, proc: subprocess.Popen) -> str:
        result: dict[str, str] = {}

        def reader():
            result["line"] = proc.stdout.readline()

        t = threading.Thread(target=reader, daemon=True)
        t.start()
        t.join(self.timeout_s)
        if t.is_alive():
            proc.kill()
            raise EvaluationError(f"worker timed out after {self.timeout_s}s")
        return result.get("line", "")

    def evaluate(self, config: Configuration, fidelity: float, seed: int) -> Observation:
        t0 = time.perf_counter()
        with self._lock:
            proc = self._ensure_process()
            self._next_id += 1
            request_id = str(self._next_id)
            request = {
                "id": request_id,
                "config": config.to_dict(),
                "fidelity": fidelity,
                "seed": int(seed),
            }
            try:
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise EvaluationError(f"worker pipe closed: {exc}") from exc
            line = self._read_line(proc)
        if not line:
            raise EvaluationError("worker closed its output stream")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"unparseable worker response: {line!r}") from exc
        if response.get("id") != request_id:
            raise EvaluationError(
                f"worker answered id {response.get('id')!r}, expected {request_id!r}"
            )
        if response.get("error") is not None:
            raise EvaluationError(f"worker error: {response['error']}")
        if "score" not in response:
            raise EvaluationError(f"worker response missing score: {line!r}")
        cost = response.get("cost")
        if cost is None:
            cost = _space.param_fraction(self.space, config)
        return Observation(
            config=config,
            score=float(response["score"]),
            cost=float(cost),
            fidelity=fidelity,
            seed=seed,
            wall_time_s=time.perf_counter() - t0,
        )

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def evaluate(backend, config: Configuration, fidelity: float, seed: int) -> Observation:
    """Uniform entry point shared by all backends."""
    if not (0.0 < fidelity <= 1.0):
        raise InvalidConfigurationError(f"fidelity {fidelity} outside (0, 1]")
    return backend.evaluate(config, fidelity, seed)
