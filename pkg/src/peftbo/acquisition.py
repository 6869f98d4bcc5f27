"""Hypervolume-improvement acquisition and discrete local search.

The acquisition value of a candidate is the Monte-Carlo average, over the
surrogate ensemble, of the hypervolume gained by adding the candidate to the
front formed by the observed configurations. "Noisy" handling: scores at the
observed configurations are re-drawn from the joint posterior in every MC
sample instead of trusting the raw noisy observations, so the baseline front
itself is integrated over. Costs are exact parameter fractions by default; an
optional cost ensemble switches the cost objective to sampled predictions.

Implementation notes: observed configurations are deduplicated and sorted
canonically before sampling, which makes the value invariant under
permutation of the observation list, and every random draw is derived from
(seed, member, candidate hash), so values are pure functions of their inputs.
Base samples are antithetic pairs, which halves Monte-Carlo variance and
makes degenerate (zero-variance) cases exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from threadpoolctl import threadpool_limits

from . import rng as _rng
from . import space as _space
from .errors import AcquisitionExhausted, InvalidConfigurationError
from .gp import GPModelState, kernel_matrix, predict
from .objectives import Observation
from .pareto import ObjectiveVector, nadir
from .space import Configuration, SearchSpaceSpec, stable_hash


@dataclass
class AcquisitionSpec:
    """Everything the acquisition needs besides the observations."""

    space: SearchSpaceSpec
    ensemble: list[GPModelState]
    mc_samples: int = 128
    ref_point: ObjectiveVector | None = None  # default: nadir of observations
    seed: int = 0
    cost_ensemble: list[GPModelState] | None = None

    def __post_init__(self):
        if self.mc_samples < 1:
            raise InvalidConfigurationError("mc_samples must be >= 1")


def _antithetic_normal(gen: np.random.Generator, n_samples: int, dim: int) -> np.ndarray:
    half = (n_samples + 1) // 2
    z = gen.standard_normal((half, dim))
    z = np.concatenate([z, -z], axis=0)
    return z[:n_samples]


class _MemberState:
    """Per-ensemble-member caches shared by all candidate evaluations."""

    def __init__(self, model: GPModelState, X_obs: np.ndarray, costs: np.ndarray,
                 ref: ObjectiveVector, n_samples: int, member_seed_parts: tuple):
        self.model = model
        self.X_obs = X_obs
        h = model.hyperparams
        n_obs = X_obs.shape[0]
        self.n_obs = n_obs
        gen = _rng.generator(*member_seed_parts, 0)
        if n_obs:
            Ks = kernel_matrix(h, model.train_x, X_obs)          # (n_tr, n_obs)
            self.V_obs = solve_triangular(model.chol_lower, Ks, lower=True)
            self.mu_obs = Ks.T @ model.alpha                      # standardized
            cov = kernel_matrix(h, X_obs) - self.V_obs.T @ self.V_obs
            lam, vecs = np.linalg.eigh(cov)
            lam = np.maximum(lam, 0.0)
            tol = max(lam.max(), 0.0) * 1e-12 + 1e-300
            inv_lam = np.where(lam > tol, 1.0 / np.maximum(lam, tol), 0.0)
            self.cov_pinv = (vecs * inv_lam) @ vecs.T
            z = _antithetic_normal(gen, n_samples, n_obs)
            self.F_std = self.mu_obs + z @ (vecs * np.sqrt(lam)).T  # (S, n_obs)
            F_raw = model.y_mean + model.y_sd * self.F_std
            order = np.argsort(costs, kind="stable")
            costs_sorted = costs[order]
            self.seg_start = costs_sorted
            self.seg_end = np.minimum(
                np.append(costs_sorted[1:], ref.cost), ref.cost
            )
            self.first_cost = min(costs_sorted[0], ref.cost)
            stair = np.maximum.accumulate(F_raw[:, order], axis=1)
            self.heights = np.maximum(stair, ref.score)           # (S, n_obs)
        else:
            self.V_obs = None
            self.first_cost = ref.cost
        self.ref = ref
        self.n_samples = n_samples

    def candidate_area(self, f_raw: np.ndarray, cost_c) -> np.ndarray:
        """Hypervolume added by the candidate, per MC sample."""
        ref = self.ref
        cost_c = np.asarray(cost_c, dtype=float)
        pre_len = np.clip(self.first_cost - cost_c, 0.0, None)
        area = np.clip(f_raw - ref.score, 0.0, None) * pre_len
        if self.n_obs:
            lo = np.maximum(self.seg_start, cost_c[..., None])
            seg = np.clip(self.seg_end - lo, 0.0, None)
            gain = np.clip(f_raw[:, None] - self.heights, 0.0, None)
            area = area + (gain * seg).sum(axis=1)
        return area


class NehviEvaluator:
    """Cached acquisition over a fixed ensemble and observation set."""

    def __init__(self, spec: AcquisitionSpec, observations: list[Observation]):
        if not spec.ensemble:
            raise InvalidConfigurationError("acquisition needs a fitted ensemble")
        self.spec = spec
        seen: dict[Configuration, None] = {}
        for obs in observations:
            seen.setdefault(obs.config, None)
        configs = sorted(
            seen, key=lambda c: tuple(_space.encode(spec.space, c))
        )
        self.obs_configs = configs
        X_obs = (
            np.array([_space.encode(spec.space, c) for c in configs])
            if configs
            else np.empty((0, spec.space.encoded_dim))
        )
        costs = np.array(
            [_space.param_fraction(spec.space, c) for c in configs]
        )
        if spec.ref_point is not None:
            self.ref = ObjectiveVector(*spec.ref_point)
        else:
            if not observations:
                raise InvalidConfigurationError(
                    "ref_point required when there are no observations"
                )
            self.ref = nadir(
                ObjectiveVector(o.score, o.cost) for o in observations
            )
        with threadpool_limits(limits=1, user_api="blas"):
            self._members = [
                _MemberState(
                    model, X_obs, costs, self.ref, spec.mc_samples, (spec.seed, i)
                )
                for i, model in enumerate(spec.ensemble)
            ]
        self._cache: dict[Configuration, float] = {}

    def __call__(self, candidate: Configuration) -> float:
        return self.value(candidate)

    def value(self, candidate: Configuration) -> float:
        cached = self._cache.get(candidate)
        if cached is not None:
            return cached
        space = self.spec.space
        x_c = _space.encode(space, candidate)
        cost_c = _space.param_fraction(space, candidate)
        cfg_hash = stable_hash(candidate)
        total = 0.0
        for i, ms in enumerate(self._members):
            model = ms.model
            h = model.hyperparams
            k_tr = kernel_matrix(h, model.train_x, x_c[None, :])[:, 0]
            v_c = solve_triangular(model.chol_lower, k_tr, lower=True)
            mu_c = float(k_tr @ model.alpha)
            post_var = max(h.outputscale - float(v_c @ v_c), 0.0)
            gen = _rng.generator(self.spec.seed, i, 1, cfg_hash)
            z_c = _antithetic_normal(gen, self.spec.mc_samples, 1)[:, 0]
            if ms.n_obs:
                # Cross posterior covariance between the candidate and the
                # observed points, then Gaussian conditioning on the drawn
                # baseline values F_std.
                q = kernel_matrix(h, x_c[None, :], ms.X_obs)[0] - v_c @ ms.V_obs
                w = ms.cov_pinv @ q
                cond_var = max(post_var - float(q @ w), 0.0)
                mean_adj = mu_c + (ms.F_std - ms.mu_obs) @ w
            else:
                cond_var = post_var
                mean_adj = np.full(self.spec.mc_samples, mu_c)
            f_std = mean_adj + np.sqrt(cond_var) * z_c
            f_raw = model.y_mean + model.y_sd * f_std
            if self.spec.cost_ensemble is not None:
                cmodel = self.spec.cost_ensemble[i % len(self.spec.cost_ensemble)]
                cm, cv = predict(cmodel, x_c)
                zc = _antithetic_normal(
                    _rng.generator(self.spec.seed, i, 2, cfg_hash),
                    self.spec.mc_samples,
                    1,
                )[:, 0]
                cost_samples = cm + np.sqrt(max(cv, 0.0)) * zc
                area = ms.candidate_area(f_raw, cost_samples)
            else:
                area = ms.candidate_area(f_raw, np.float64(cost_c))
            total += float(area.mean())
        value = total / len(self._members)
        self._cache[candidate] = value
        return value


def nehvi(
    spec: AcquisitionSpec,
    observations: list[Observation],
    candidate: Configuration,
) -> float:
    """One-shot acquisition value; build a :class:`NehviEvaluator` for loops."""
    return NehviEvaluator(spec, observations).value(candidate)


def _better(a, b) -> bool:
    """Candidate preference: higher value, then cheaper, then smaller encoding."""
    (va, ca, ea), (vb, cb, eb) = a, b
    if va != vb:
        return va > vb
    if ca != cb:
        return ca < cb
    return ea < eb


def local_search(
    space: SearchSpaceSpec,
    acq,
    starts: list[Configuration],
    max_steps: int = 64,
    exclude: frozenset[Configuration] | set[Configuration] = frozenset(),
) -> Configuration:
    """Hill-climb the acquisition over single-move neighborhoods.

    From every start the walk moves to the best neighbor whenever that
    neighbor improves on the current point; ties on the acquisition value
    are broken toward lower parameter cost and then lexicographically
    smaller encoding, both while walking and when picking the final answer,
    so flat regions drain toward cheap configurations deterministically.
    Configurations in ``exclude`` may be walked through but never returned;
    if everything visited is excluded an :class:`AcquisitionExhausted` is
    raised so the caller can fall back to random sampling.
    """
    if not starts:
        raise InvalidConfigurationError("local search needs at least one start")
    ranks: dict[Configuration, tuple] = {}

    def rank(cfg: Configuration):
        r = ranks.get(cfg)
        if r is None:
            r = (
                float(acq(cfg)),
                _space.param_fraction(space, cfg),
                tuple(_space.encode(space, cfg)),
            )
            ranks[cfg] = r
        return r

    for start in starts:
        current = start
        current_rank = rank(current)
        for _ in range(max_steps):
            best_neighbor = None
            best_rank = current_rank
            for nb in _space.neighbors(space, current):
                r = rank(nb)
                if _better(r, best_rank):
                    best_neighbor = nb
                    best_rank = r
            if best_neighbor is None:
                break
            current, current_rank = best_neighbor, best_rank

    best = None
    best_rank = None
    for cfg, r in ranks.items():
        if cfg in exclude:
            continue
        if best is None or _better(r, best_rank):
            best, best_rank = cfg, r
    if best is None:
        raise AcquisitionExhausted(
            f"all {len(ranks)} visited configurations were already evaluated"
        )
    return best
