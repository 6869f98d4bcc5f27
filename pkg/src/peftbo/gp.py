"""Gaussian-process surrogate with hierarchical shrinkage on dimension relevance.

A Matern-5/2 kernel with one inverse squared lengthscale per input dimension
is fitted by MAP under sparsity-inducing priors: the global shrinkage scale
``tau`` gets a half-Cauchy(0.1) prior and each inverse squared lengthscale
``rho_i`` a half-Cauchy(tau) prior, so dimensions the data does not support
collapse toward irrelevance while strong dimensions stay active. Several
seeded restarts are fitted and all of them are kept; the resulting ensemble
of hyperparameter settings is what downstream acquisition averages over, in
place of full posterior sampling.

All optimization happens in log space over standardized targets. The prior
is evaluated as a density over the log parameters (change-of-variables terms
included), which is the function the optimizer actually ascends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotri
from threadpoolctl import threadpool_limits

from .errors import DimensionError, InvalidConfigurationError, NumericalError

NOISE_FLOOR = 1e-6
JITTER_LADDER = (1e-6, 1e-4, 1e-2)
TAU_PRIOR_SCALE = 0.1
NOISE_PRIOR_SCALE = 1e-3
ADAM_STEPS = 200
ADAM_LR = 0.08
_SQRT5 = math.sqrt(5.0)

# Box keeping exp() finite during optimization: [log_os, log_noise, log_tau, log_rho...]
_BOX_LO = np.array([-8.0, -20.0, -12.0])
_BOX_HI = np.array([8.0, 5.0, 8.0])
_RHO_LO, _RHO_HI = -18.0, 12.0


@dataclass(frozen=True, eq=False)
class KernelHyperparams:
    """Log-parameterized kernel hyperparameters.

    Noise is floored at :data:`NOISE_FLOOR` after exponentiation so the
    kernel matrix stays positive definite.
    """

    log_outputscale: float
    log_noise: float
    log_inv_sq_lengthscales: np.ndarray
    log_tau: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "log_inv_sq_lengthscales",
            np.asarray(self.log_inv_sq_lengthscales, dtype=float),
        )
        vec = self.as_vector()
        if not np.all(np.isfinite(vec)):
            raise InvalidConfigurationError("hyperparameters must be finite")

    @property
    def outputscale(self) -> float:
        return math.exp(self.log_outputscale)

    @property
    def noise(self) -> float:
        return math.exp(self.log_noise) + NOISE_FLOOR

    @property
    def inv_sq_lengthscales(self) -> np.ndarray:
        return np.exp(self.log_inv_sq_lengthscales)

    @property
    def tau(self) -> float:
        return math.exp(self.log_tau)

    @property
    def dim(self) -> int:
        return self.log_inv_sq_lengthscales.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            (
                [self.log_outputscale, self.log_noise, self.log_tau],
                self.log_inv_sq_lengthscales,
            )
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "KernelHyperparams":
        vec = np.asarray(vec, dtype=float)
        return cls(
            log_outputscale=float(vec[0]),
            log_noise=float(vec[1]),
            log_inv_sq_lengthscales=vec[3:].copy(),
            log_tau=float(vec[2]),
        )


@dataclass(frozen=True, eq=False)
class GPModelState:
    """One fitted model: hyperparameters plus cached training factorization.

    ``train_y`` holds standardized targets; ``y_mean``/``y_sd`` restore the
    original scale. ``chol_lower`` is the Cholesky factor of the kernel
    matrix (including noise and any escalated jitter) and ``alpha`` solves
    K alpha = train_y.
    """

    hyperparams: KernelHyperparams
    train_x: np.ndarray
    train_y: np.ndarray
    y_mean: float
    y_sd: float
    chol_lower: np.ndarray
    alpha: np.ndarray
    map_objective: float = float("-inf")

    @property
    def n_train(self) -> int:
        return self.train_x.shape[0]


def _check_points(points, dim: int | None = None) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"points must be 2-D, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise DimensionError(f"expected dimension {dim}, got {X.shape[1]}")
    return X


def _matern52(r: np.ndarray) -> np.ndarray:
    return (1.0 + _SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-_SQRT5 * r)


def _scaled_sq_dists(X: np.ndarray, Z: np.ndarray, rho: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Z[None, :, :]
    return np.einsum("abi,i->ab", diff * diff, rho)


def kernel_matrix(
    h: KernelHyperparams, X: np.ndarray, Z: np.ndarray | None = None
) -> np.ndarray:
    """Cross-covariance os * matern52(r) without any noise term."""
    X = _check_points(X, h.dim)
    Z = X if Z is None else _check_points(Z, h.dim)
    r = np.sqrt(np.maximum(_scaled_sq_dists(X, Z, h.inv_sq_lengthscales), 0.0))
    return h.outputscale * _matern52(r)


def _chol_with_ladder(K: np.ndarray) -> tuple[np.ndarray, float]:
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(K.shape[0])
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"kernel factorization failed after jitter up to {JITTER_LADDER[-1]}"
    )


def _chol_inverse(L: np.ndarray) -> np.ndarray:
    inv, info = dpotri(np.asfortranarray(L), lower=1)
    if info != 0:
        raise NumericalError(f"dpotri failed with info={info}")
    # dpotri fills one triangle only.
    inv = np.tril(inv) + np.tril(inv, -1).T
    return inv


def _lml_terms(vec: np.ndarray, X: np.ndarray, y: np.ndarray, D2flat: np.ndarray):
    """Shared forward pass: factorization plus everything gradients need."""
    n, d = X.shape
    os_ = math.exp(vec[0])
    noise = math.exp(vec[1]) + NOISE_FLOOR
    rho = np.exp(vec[3:])
    u = (D2flat @ rho).reshape(n, n)
    np.maximum(u, 0.0, out=u)
    r = np.sqrt(u)
    sr = _SQRT5 * r
    E = np.exp(-sr)
    M = (1.0 + sr + (5.0 / 3.0) * u) * E
    K = os_ * M
    K[np.diag_indices(n)] += noise
    L, _ = _chol_with_ladder(K)
    alpha = solve_triangular(
        L.T, solve_triangular(L, y, lower=True), lower=False
    )
    logdet = 2.0 * np.log(np.diag(L)).sum()
    lml = -0.5 * float(y @ alpha) - 0.5 * logdet - 0.5 * n * math.log(2.0 * math.pi)
    return lml, (os_, noise, rho, sr, E, M, L, alpha)


def log_marginal_likelihood(
    h: KernelHyperparams, points, values
) -> float:
    """Exact Gaussian log marginal likelihood of ``values`` at ``points``."""
    X = _check_points(points, h.dim)
    y = np.asarray(values, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionError("points and values disagree in length")
    D2flat = _pair_sq_dists_flat(X)
    lml, _ = _lml_terms(h.as_vector(), X, y, D2flat)
    return lml


def log_marginal_likelihood_grad(h: KernelHyperparams, points, values) -> np.ndarray:
    """Analytic gradient of the LML w.r.t. the log-parameter vector."""
    X = _check_points(points, h.dim)
    y = np.asarray(values, dtype=float).ravel()
    D2flat = _pair_sq_dists_flat(X)
    _, grad = _lml_value_grad(h.as_vector(), X, y, D2flat)
    return grad


def log_shrinkage_prior(h: KernelHyperparams) -> float:
    """Log density of the shrinkage prior over the log parameters.

    Half-Cauchy(0.1) on tau, half-Cauchy(tau) on each rho_i, and
    half-Cauchy(1e-3) on the noise variance, each with its log-space
    Jacobian term. The noise prior concentrates near zero so small
    noiseless datasets interpolate instead of being absorbed as noise,
    while its heavy tail lets plentiful data push the noise up freely.
    """
    val, _ = _prior_value_grad(h.as_vector())
    return val


def log_posterior(h: KernelHyperparams, points, values) -> float:
    """Fit objective: log marginal likelihood plus shrinkage prior."""
    return log_marginal_likelihood(h, points, values) + log_shrinkage_prior(h)


def log_posterior_grad(h: KernelHyperparams, points, values) -> np.ndarray:
    X = _check_points(points, h.dim)
    y = np.asarray(values, dtype=float).ravel()
    D2flat = _pair_sq_dists_flat(X)
    _, g_lml = _lml_value_grad(h.as_vector(), X, y, D2flat)
    _, g_prior = _prior_value_grad(h.as_vector())
    return g_lml + g_prior


def _pair_sq_dists_flat(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    n, _, d = diff.shape
    return (diff * diff).reshape(n * n, d)


def _lml_value_grad(vec, X, y, D2flat):
    n, d = X.shape
    lml, (os_, noise, rho, sr, E, M, L, alpha) = _lml_terms(vec, X, y, D2flat)
    Kinv = _chol_inverse(L)
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty(3 + d)
    grad[0] = 0.5 * os_ * float((W * M).sum())
    grad[1] = 0.5 * math.exp(vec[1]) * float(np.trace(W))
    grad[2] = 0.0  # tau enters only through the prior
    dM_du = (-(5.0 / 6.0)) * (1.0 + sr) * E
    G = (0.5 * os_) * (W * dM_du)
    grad[3:] = (G.reshape(-1) @ D2flat) * rho
    return lml, grad


def _prior_value_grad(vec: np.ndarray):
    tau = math.exp(vec[2])
    rho = np.exp(vec[3:])
    log_2_pi = math.log(2.0 / math.pi)
    # tau ~ HC(0.1), log-space density includes +log tau.
    s2 = TAU_PRIOR_SCALE**2
    val = log_2_pi - math.log(TAU_PRIOR_SCALE) - math.log1p(tau * tau / s2) + vec[2]
    # rho_i ~ HC(tau), again with the +log rho_i Jacobian.
    ratio2 = rho * rho / (tau * tau)
    val += float(
        (log_2_pi - vec[2] - np.log1p(ratio2) + vec[3:]).sum()
    )
    # noise ~ HC(1e-3) on the floored variance; Jacobian of exp(log_noise).
    c2 = NOISE_PRIOR_SCALE**2
    s_noise = math.exp(vec[1]) + NOISE_FLOOR
    val += (
        log_2_pi
        - math.log(NOISE_PRIOR_SCALE)
        - math.log1p(s_noise * s_noise / c2)
        + vec[1]
    )
    grad = np.zeros_like(vec)
    rho2 = rho * rho
    tau2 = tau * tau
    grad[1] = 1.0 - 2.0 * s_noise * math.exp(vec[1]) / (c2 + s_noise * s_noise)
    grad[2] = (
        1.0
        - 2.0 * tau2 / (s2 + tau2)
        + float((-1.0 + 2.0 * rho2 / (tau2 + rho2)).sum())
    )
    grad[3:] = 1.0 - 2.0 * rho2 / (tau2 + rho2)
    return val, grad


def _init_thetas(restarts: int, d: int, rng: np.random.Generator) -> np.ndarray:
    def log_uniform(lo, hi, size):
        return rng.uniform(math.log(lo), math.log(hi), size)

    theta = np.empty((restarts, 3 + d))
    theta[:, 0] = log_uniform(0.5, 2.0, restarts)
    theta[:, 1] = log_uniform(1e-4, 0.25, restarts)
    theta[:, 2] = log_uniform(0.01, 0.5, restarts)
    theta[:, 3:] = log_uniform(0.05, 4.0, (restarts, d))
    return theta


def _clip_theta(theta: np.ndarray) -> np.ndarray:
    theta[:, :3] = np.clip(theta[:, :3], _BOX_LO, _BOX_HI)
    theta[:, 3:] = np.clip(theta[:, 3:], _RHO_LO, _RHO_HI)
    return theta


def fit(points, values, restarts: int = 8, rng_seed: int = 0) -> list[GPModelState]:
    """MAP-fit an ensemble of ``restarts`` models with seeded initializations.

    Targets are standardized internally; each restart runs Adam in log space
    for :data:`ADAM_STEPS` steps on LML + shrinkage prior and the best point
    seen along its trajectory is kept.
    """
    X = _check_points(points)
    y = np.asarray(values, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionError("points and values disagree in length")
    if X.shape[0] < 2:
        raise InvalidConfigurationError("fit needs at least 2 observations")
    if restarts < 1:
        raise InvalidConfigurationError("restarts must be >= 1")

    y_mean = float(y.mean())
    y_sd = float(y.std())
    if y_sd < 1e-12:
        y_sd = 1.0  # constant targets: noise absorbs everything
    ystd = (y - y_mean) / y_sd

    d = X.shape[1]
    D2flat = _pair_sq_dists_flat(X)
    rng = np.random.default_rng(np.random.SeedSequence(int(rng_seed) & ((1 << 63) - 1)))
    theta = _clip_theta(_init_thetas(restarts, d, rng))

    best_theta = theta.copy()
    best_val = np.full(restarts, -np.inf)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    # Threaded BLAS thrashes on the many small factorizations in this loop.
    with threadpool_limits(limits=1, user_api="blas"):
        for t in range(1, ADAM_STEPS + 1):
            vals = np.empty(restarts)
            grads = np.empty_like(theta)
            for j in range(restarts):
                lml, g_lml = _lml_value_grad(theta[j], X, ystd, D2flat)
                pri, g_pri = _prior_value_grad(theta[j])
                vals[j] = lml + pri
                grads[j] = g_lml + g_pri
            improved = vals > best_val
            best_val[improved] = vals[improved]
            best_theta[improved] = theta[improved]
            m = b1 * m + (1 - b1) * grads
            v = b2 * v + (1 - b2) * grads * grads
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            theta = _clip_theta(theta + ADAM_LR * m_hat / (np.sqrt(v_hat) + eps))

        for j in range(restarts):
            lml, _ = _lml_terms(theta[j], X, ystd, D2flat)
            pri, _ = _prior_value_grad(theta[j])
            if lml + pri > best_val[j]:
                best_theta[j] = theta[j]
                best_val[j] = lml + pri

        states = []
        for j in range(restarts):
            h = KernelHyperparams.from_vector(best_theta[j])
            K = kernel_matrix(h, X)
            K[np.diag_indices(X.shape[0])] += h.noise
            L, _ = _chol_with_ladder(K)
            alpha = solve_triangular(
                L.T, solve_triangular(L, ystd, lower=True), lower=False
            )
            states.append(
                GPModelState(
                    hyperparams=h,
                    train_x=X.copy(),
                    train_y=ystd.copy(),
                    y_mean=y_mean,
                    y_sd=y_sd,
                    chol_lower=L,
                    alpha=alpha,
                    map_objective=float(best_val[j]),
                )
            )
    # Best MAP restart first; stable on ties so the order stays deterministic.
    states.sort(key=lambda s: -s.map_objective)
    return states


def condition(h: KernelHyperparams, points, values) -> GPModelState:
    """Build a fitted-state view for fixed hyperparameters.

    Standardizes the targets and caches the kernel factorization exactly as
    :func:`fit` does, but skips optimization; useful for constructing
    controlled posteriors.
    """
    X = _check_points(points, h.dim)
    y = np.asarray(values, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionError("points and values disagree in length")
    y_mean = float(y.mean())
    y_sd = float(y.std())
    if y_sd < 1e-12:
        y_sd = 1.0
    ystd = (y - y_mean) / y_sd
    K = kernel_matrix(h, X)
    K[np.diag_indices(X.shape[0])] += h.noise
    L, _ = _chol_with_ladder(K)
    alpha = solve_triangular(L.T, solve_triangular(L, ystd, lower=True), lower=False)
    return GPModelState(
        hyperparams=h,
        train_x=X.copy(),
        train_y=ystd,
        y_mean=y_mean,
        y_sd=y_sd,
        chol_lower=L,
        alpha=alpha,
        map_objective=log_posterior(h, X, y),
    )


def _posterior_joint_std(model: GPModelState, points) -> tuple[np.ndarray, np.ndarray]:
    """Latent posterior mean and covariance in standardized units."""
    Z = _check_points(points, model.hyperparams.dim)
    Ks = kernel_matrix(model.hyperparams, model.train_x, Z)  # (n, m)
    V = solve_triangular(model.chol_lower, Ks, lower=True)
    mean = Ks.T @ model.alpha
    Kss = kernel_matrix(model.hyperparams, Z)
    cov = Kss - V.T @ V
    return mean, cov


def predict(model: GPModelState, points) -> tuple[np.ndarray, np.ndarray]:
    """De-standardized latent predictive mean and variance.

    Accepts one point (returns scalars) or a stack of points (returns
    arrays). Variance excludes observation noise and is clipped at zero.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    Z = _check_points(pts, model.hyperparams.dim)
    Ks = kernel_matrix(model.hyperparams, model.train_x, Z)
    V = solve_triangular(model.chol_lower, Ks, lower=True)
    mean_std = Ks.T @ model.alpha
    var_std = np.maximum(
        model.hyperparams.outputscale - (V * V).sum(axis=0), 0.0
    )
    mean = model.y_mean + model.y_sd * mean_std
    var = model.y_sd**2 * var_std
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def sample_posterior(
    ensemble: list[GPModelState], points, n_samples: int, seed: int
) -> np.ndarray:
    """Joint posterior draws of the latent function at ``points``.

    Returns an array of shape (len(ensemble), n_samples, n_points) in
    de-standardized units; deterministic given ``seed``.
    """
    if not ensemble:
        raise InvalidConfigurationError("empty ensemble")
    if n_samples < 1:
        raise InvalidConfigurationError("n_samples must be >= 1")
    Z = _check_points(points, ensemble[0].hyperparams.dim)
    m = Z.shape[0]
    ss = np.random.SeedSequence(int(seed) & ((1 << 63) - 1))
    children = ss.spawn(len(ensemble))
    out = np.empty((len(ensemble), n_samples, m))
    for i, model in enumerate(ensemble):
        mean, cov = _posterior_joint_std(model, Z)
        L, _ = _chol_with_ladder(cov)
        z = np.random.default_rng(children[i]).standard_normal((n_samples, m))
        draws = mean + z @ L.T
        out[i] = model.y_mean + model.y_sd * draws
    return out
