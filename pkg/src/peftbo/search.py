"""End-to-end search loop: random initialization, model-guided suggestion,
bookkeeping, persistence, and the random-search baseline.

Determinism discipline: one master seed fans out through counter-derived
streams (initial sampling, per-evaluation seeds, surrogate restarts, Monte
Carlo draws, random fallback), so a resumed run replays exactly the same
decisions as an uninterrupted one without serializing generator state.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gp as _gp
from . import rng as _rng
from . import space as _space
from .acquisition import AcquisitionSpec, NehviEvaluator, local_search
from .errors import (
    AcquisitionExhausted,
    InvalidConfigurationError,
    PeftBoError,
    RunInterrupted,
    StateError,
)
from .objectives import Observation, evaluate
from .pareto import ObjectiveVector, ParetoFront, hypervolume, nadir, non_dominated
from .space import Configuration, SearchSpaceSpec

logger = logging.getLogger(__name__)

_STREAM_INIT = 0
_STREAM_EVAL = 1
_STREAM_FIT = 2
_STREAM_MC = 3
_STREAM_FALLBACK = 4

_STATE_FORMAT = "peftbo-state-v1"
_ENUMERATION_LIMIT = 1_000_000


@dataclass
class RunConfig:
    """Knobs for one search run; see field defaults for the standard budget."""

    space: SearchSpaceSpec
    backend: object
    n_init: int = 100
    n_total: int = 200
    batch_q: int = 1
    fidelity: float = 0.05
    master_seed: int = 0
    mc_samples: int = 128
    restarts: int = 8
    refit_every: int = 1
    dedup: bool = True
    model_cost: bool = False
    local_search_steps: int = 64
    state_path: str | os.PathLike | None = None
    log_path: str | os.PathLike | None = None

    def __post_init__(self):
        if self.n_init < 1:
            raise InvalidConfigurationError("n_init must be >= 1")
        if self.n_total <= self.n_init:
            raise InvalidConfigurationError("n_total must exceed n_init")
        if not (0.0 < self.fidelity <= 1.0):
            raise InvalidConfigurationError("fidelity must be in (0, 1]")
        if self.batch_q < 1:
            raise InvalidConfigurationError("batch_q must be >= 1")
        if self.refit_every < 1:
            raise InvalidConfigurationError("refit_every must be >= 1")


@dataclass
class RunState:
    """Full trajectory of one run; serializable and resumable."""

    space: SearchSpaceSpec
    master_seed: int
    n_init: int
    n_total: int
    fidelity: float
    observations: list[Observation] = field(default_factory=list)
    iteration: int = 0
    trajectory: list[tuple[int, float]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return len(self.observations) >= self.n_total

    def to_dict(self) -> dict:
        return {
            "format": _STATE_FORMAT,
            "space": self.space.to_dict(),
            "master_seed": self.master_seed,
            "n_init": self.n_init,
            "n_total": self.n_total,
            "fidelity": self.fidelity,
            "iteration": self.iteration,
            "observations": [o.to_dict() for o in self.observations],
            "trajectory": [[int(n), float(h)] for n, h in self.trajectory],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunState":
        try:
            space = SearchSpaceSpec.from_dict(data["space"])
            obs = [
                Observation.from_dict(rec, space.num_layers)
                for rec in data["observations"]
            ]
            return cls(
                space=space,
                master_seed=int(data["master_seed"]),
                n_init=int(data["n_init"]),
                n_total=int(data["n_total"]),
                fidelity=float(data["fidelity"]),
                observations=obs,
                iteration=int(data["iteration"]),
                trajectory=[(int(n), float(h)) for n, h in data["trajectory"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StateError(f"bad run state: {exc}") from exc

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(self.to_dict(), fh)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path) -> "RunState":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StateError(f"unparseable state file {path}: {exc}") from exc
        except OSError as exc:
            raise StateError(f"cannot read state file {path}: {exc}") from exc
        if not isinstance(data, dict) or data.get("format") != _STATE_FORMAT:
            raise StateError(f"{path} is not a {_STATE_FORMAT} file")
        return cls.from_dict(data)


def observation_vectors(observations) -> list[ObjectiveVector]:
    return [ObjectiveVector(o.score, o.cost) for o in observations]


def front_of(observations) -> ParetoFront:
    return non_dominated(
        (o.config, ObjectiveVector(o.score, o.cost)) for o in observations
    )


def hypervolume_trajectory(state_or_observations) -> list[tuple[int, float]]:
    """Hypervolume of each observation prefix's front.

    The reference point is the nadir of the full trajectory, so the curve is
    non-decreasing and directly comparable across runs replaying the same
    observations.
    """
    if isinstance(state_or_observations, RunState):
        observations = state_or_observations.observations
    else:
        observations = list(state_or_observations)
    if not observations:
        return []
    ref = nadir(observation_vectors(observations))
    out = []
    prefix: list[ObjectiveVector] = []
    for i, obs in enumerate(observations, start=1):
        prefix.append(ObjectiveVector(obs.score, obs.cost))
        out.append((i, hypervolume(prefix, ref)))
    return out


class _Appender:
    """Line-per-observation log writer; no-op when no path is configured."""

    def __init__(self, path):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, obs: Observation, iteration: int) -> None:
        if self.path is None:
            return
        record = obs.to_dict()
        record["iteration"] = iteration
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _sample_unique(
    space: SearchSpaceSpec,
    rng: np.random.Generator,
    n: int,
    taken: set[Configuration],
) -> list[Configuration]:
    """Draw until ``n`` fresh configurations are found, resampling duplicates.

    Falls back to enumerating the remainder when rejection sampling stalls,
    which only small spaces can trigger.
    """
    out: list[Configuration] = []
    seen = set(taken)
    budget = 1000 + 200 * n
    tries = 0
    while len(out) < n:
        if tries >= budget:
            total = _space.cardinality(space)
            remaining_count = total - len(seen)
            if remaining_count <= 0:
                raise AcquisitionExhausted("search space exhausted")
            if total > _ENUMERATION_LIMIT:
                budget *= 4  # astronomically unlikely for big spaces
                continue
            remaining = [c for c in _space.enumerate_all(space) if c not in seen]
            order = rng.permutation(len(remaining))
            for idx in order:
                if len(out) >= n:
                    break
                cfg = remaining[idx]
                seen.add(cfg)
                out.append(cfg)
            break
        cfg = _space._draw(space, rng)
        tries += 1
        if cfg in seen:
            continue
        seen.add(cfg)
        out.append(cfg)
    return out


def _evaluate_at(cfg: RunConfig, config: Configuration, index: int) -> Observation:
    seed = _rng.derive_seed(cfg.master_seed, _STREAM_EVAL, index)
    return evaluate(cfg.backend, config, cfg.fidelity, seed)


def _persist(cfg: RunConfig, state: RunState) -> None:
    if cfg.state_path is not None:
        state.save(cfg.state_path)


def _finalize(cfg: RunConfig, state: RunState) -> tuple[ParetoFront, RunState]:
    state.trajectory = hypervolume_trajectory(state.observations)
    state.iteration = len(state.observations)
    _persist(cfg, state)
    return front_of(state.observations), state


def _check_state_matches(cfg: RunConfig, state: RunState) -> None:
    if state.space != cfg.space:
        raise StateError(
            "state file was produced for a different search space: "
            f"{state.space.to_dict()} vs {cfg.space.to_dict()}"
        )
    if state.master_seed != cfg.master_seed:
        raise StateError(
            f"state master_seed {state.master_seed} != run config {cfg.master_seed}"
        )
    if (state.n_init, state.n_total) != (cfg.n_init, cfg.n_total):
        raise StateError(
            "state budget "
            f"({state.n_init}, {state.n_total}) != run config "
            f"({cfg.n_init}, {cfg.n_total})"
        )
    if state.fidelity != cfg.fidelity:
        raise StateError(
            f"state fidelity {state.fidelity} != run config {cfg.fidelity}"
        )


def _drive(cfg: RunConfig, state: RunState, bo: bool) -> tuple[ParetoFront, RunState]:
    log = _Appender(cfg.log_path)
    evaluated = {o.config for o in state.observations}

    def run_eval(config: Configuration) -> Observation:
        index = len(state.observations)
        try:
            obs = _evaluate_at(cfg, config, index)
        except PeftBoError as exc:
            state.trajectory = hypervolume_trajectory(state.observations)
            state.iteration = len(state.observations)
            _persist(cfg, state)
            raise RunInterrupted(
                f"backend failed at evaluation {index}: {exc}",
                state_path=cfg.state_path,
            ) from exc
        state.observations.append(obs)
        state.iteration = len(state.observations)
        evaluated.add(config)
        log.append(obs, index)
        return obs

    # Deterministic (re)computation of the random stage: the same stream and
    # dedup walk always produce the same list, so resuming mid-init just
    # skips the prefix that was already evaluated.
    n_random = state.n_total if not bo else state.n_init
    if len(state.observations) < n_random:
        init_rng = _rng.generator(cfg.master_seed, _STREAM_INIT)
        planned = _sample_unique(cfg.space, init_rng, n_random, set())
        already = len(state.observations)
        for i, config in enumerate(planned):
            if i < already:
                continue
            run_eval(config)
            if not bo:
                if len(state.observations) % 25 == 0:
                    state.trajectory = hypervolume_trajectory(state.observations)
                    _persist(cfg, state)
        state.trajectory = hypervolume_trajectory(state.observations)
        _persist(cfg, state)

    if not bo:
        return _finalize(cfg, state)

    ensemble = None
    cost_ensemble = None
    fitted_at = -1
    while len(state.observations) < state.n_total:
        index = len(state.observations)
        observations = state.observations
        points = np.array([_space.encode(cfg.space, o.config) for o in observations])
        scores = np.array([o.score for o in observations])

        suggestions: list[Configuration] = []
        if len(observations) >= 2:
            if ensemble is None or index - fitted_at >= cfg.refit_every:
                fit_seed = _rng.derive_seed(cfg.master_seed, _STREAM_FIT, index)
                ensemble = _gp.fit(points, scores, cfg.restarts, fit_seed)
                if cfg.model_cost:
                    costs = np.array([o.cost for o in observations])
                    cost_ensemble = _gp.fit(points, costs, cfg.restarts, fit_seed + 1)
                fitted_at = index
            mc_seed = _rng.derive_seed(cfg.master_seed, _STREAM_MC, index)
            spec = AcquisitionSpec(
                space=cfg.space,
                ensemble=ensemble,
                mc_samples=cfg.mc_samples,
                ref_point=nadir(observation_vectors(observations)),
                seed=mc_seed,
                cost_ensemble=cost_ensemble,
            )
            starts = front_of(observations).configs
            fantasy = list(observations)
            take = min(cfg.batch_q, state.n_total - len(observations))
            for j in range(take):
                evaluator = NehviEvaluator(spec, fantasy)
                exclude = (
                    evaluated | set(suggestions) if cfg.dedup else set(suggestions)
                )
                try:
                    config = local_search(
                        cfg.space,
                        evaluator,
                        starts,
                        max_steps=cfg.local_search_steps,
                        exclude=exclude,
                    )
                except AcquisitionExhausted:
                    config = _fallback(cfg, index, j, exclude, state)
                    if config is None:
                        break
                suggestions.append(config)
                if j + 1 < take:
                    mean = float(
                        np.mean([_gp.predict(m, _space.encode(cfg.space, config))[0]
                                 for m in ensemble])
                    )
                    fantasy.append(
                        Observation(
                            config=config,
                            score=mean,
                            cost=_space.param_fraction(cfg.space, config),
                            fidelity=cfg.fidelity,
                            seed=0,
                        )
                    )
        else:
            config = _fallback(cfg, index, 0, evaluated, state)
            if config is not None:
                suggestions.append(config)

        if not suggestions:
            logger.warning("search space exhausted at %d evaluations", index)
            break
        for config in suggestions:
            run_eval(config)
        state.trajectory = hypervolume_trajectory(state.observations)
        _persist(cfg, state)

    return _finalize(cfg, state)


def _fallback(
    cfg: RunConfig, index: int, offset: int, exclude: set, state: RunState
) -> Configuration | None:
    rng = _rng.generator(cfg.master_seed, _STREAM_FALLBACK, index, offset)
    try:
        picked = _sample_unique(cfg.space, rng, 1, exclude)
    except AcquisitionExhausted:
        return None
    logger.info(
        "iteration %d: falling back to random sampling", len(state.observations)
    )
    return picked[0]


def run(cfg: RunConfig) -> tuple[ParetoFront, RunState]:
    """Full model-guided search from scratch."""
    state = RunState(
        space=cfg.space,
        master_seed=cfg.master_seed,
        n_init=cfg.n_init,
        n_total=cfg.n_total,
        fidelity=cfg.fidelity,
    )
    return _drive(cfg, state, bo=True)


def random_search(cfg: RunConfig) -> tuple[ParetoFront, RunState]:
    """Uniform-sampling baseline sharing the run's first ``n_init`` draws."""
    state = RunState(
        space=cfg.space,
        master_seed=cfg.master_seed,
        n_init=cfg.n_init,
        n_total=cfg.n_total,
        fidelity=cfg.fidelity,
    )
    return _drive(cfg, state, bo=False)


def resume(state_path, cfg: RunConfig, bo: bool = True) -> tuple[ParetoFront, RunState]:
    """Continue a persisted run to ``n_total``.

    A completed state returns immediately unchanged. On deterministic
    backends the resumed trajectory is identical to an uninterrupted run.
    """
    state = RunState.load(state_path)
    _check_state_matches(cfg, state)
    if state.complete:
        return front_of(state.observations), state
    return _drive(cfg, state, bo=bo)
