"""Per-objective Gaussian-process regression with analytic mean gradients.

The kernel is squared-exponential with one lengthscale per input dimension.
Inputs are expected in the unit box; targets are standardized internally to
zero mean and unit variance. Hyperparameters are chosen by maximizing the log
marginal likelihood over log-parameters with a multi-start simplex search,
which keeps the fit dependency-free and cheap at the archive sizes this
package works with (n <= a few hundred).

Predictions and gradients are reported in raw target units. When a model is
fitted with an ``x_scale`` record (the width of the original box before unit
normalization), gradients are additionally mapped back to raw decision units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize
from ._blas import single_thread_blas

from .errors import IllConditionedError, InvalidDataError

_LOG2PI = np.log(2.0 * np.pi)

# Search box for log hyperparameters: signal variance, lengthscales, noise
# variance. Wide enough for standardized targets on unit-box inputs.
_LOG_SIGNAL_BOUNDS = (np.log(1e-3), np.log(1e3))
_LOG_LENGTH_BOUNDS = (np.log(1e-2), np.log(1e1))
_LOG_NOISE_BOUNDS = (np.log(1e-8), np.log(1e0))

_N_RESTARTS = 4
_MAX_ITER = 200
_FATOL = 1e-6

_JITTER_START = 1e-8
_JITTER_MAX = 1e-2


@dataclass(frozen=True)
class KernelHyper:
    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float


@dataclass(frozen=True)
class GPModel:
    """Fitted GP posterior state, immutable and safe to share across threads."""

    X_train: np.ndarray  # n x d, unit-box coordinates
    y_mean: float
    y_std: float
    alpha: np.ndarray  # (K + noise I)^-1 y_standardized
    chol: np.ndarray  # lower Cholesky factor of K + noise I
    hyper: KernelHyper
    x_scale: np.ndarray  # raw-box width per dimension (ones if already unit)
    x_lower: np.ndarray  # raw-box lower corner (zeros if already unit)


def _kernel_cross(hyper: KernelHyper, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    As = A / hyper.lengthscales
    Bs = B / hyper.lengthscales
    sq_a = np.einsum("ij,ij->i", As, As)
    sq_b = np.einsum("ij,ij->i", Bs, Bs)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (As @ Bs.T)
    np.maximum(d2, 0.0, out=d2)
    return hyper.signal_variance * np.exp(-0.5 * d2)


def _chol_with_jitter(K: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    """Cholesky of K + (noise + jitter) I, escalating jitter tenfold on failure.

    Returns the factor and the total diagonal addition actually used, so the
    caller can fold the escalation into the stored noise variance.
    """
    n = K.shape[0]
    jitter = 0.0
    while True:
        Kn = K.copy()
        Kn[np.diag_indices(n)] += noise + jitter
        try:
            L = cholesky(Kn, lower=True, check_finite=False)
            return L, noise + jitter
        except np.linalg.LinAlgError:
            jitter = _JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > _JITTER_MAX:
                raise IllConditionedError(
                    f"kernel matrix not positive definite up to jitter {_JITTER_MAX}"
                ) from None


def _make_neg_lml(X: np.ndarray, y: np.ndarray):
    n, d = X.shape
    lo = np.concatenate([[_LOG_SIGNAL_BOUNDS[0]], np.full(d, _LOG_LENGTH_BOUNDS[0]), [_LOG_NOISE_BOUNDS[0]]])
    hi = np.concatenate([[_LOG_SIGNAL_BOUNDS[1]], np.full(d, _LOG_LENGTH_BOUNDS[1]), [_LOG_NOISE_BOUNDS[1]]])

    def neg_lml(theta: np.ndarray) -> float:
        if np.any(theta < lo) or np.any(theta > hi):
            return 1e12
        sig2 = np.exp(theta[0])
        ls = np.exp(theta[1 : 1 + d])
        noise = np.exp(theta[1 + d])
        Xs = X / ls
        sq = np.einsum("ij,ij->i", Xs, Xs)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (Xs @ Xs.T)
        np.maximum(d2, 0.0, out=d2)
        d2 *= -0.5
        K = np.exp(d2, out=d2)
        K *= sig2
        K[np.diag_indices(n)] += noise
        try:
            L = cholesky(K, lower=True, check_finite=False, overwrite_a=True)
        except np.linalg.LinAlgError:
            return 1e12
        a = solve_triangular(L, y, lower=True, check_finite=False)
        return float(0.5 * (a @ a) + np.sum(np.log(L.diagonal())) + 0.5 * n * _LOG2PI)

    return neg_lml


def log_marginal_likelihood(X: np.ndarray, y_standardized: np.ndarray, hyper: KernelHyper) -> float:
    """LML of standardized targets under the given hyperparameters."""
    theta = np.concatenate(
        [
            [np.log(hyper.signal_variance)],
            np.log(hyper.lengthscales),
            [np.log(hyper.noise_variance)],
        ]
    )
    return -_make_neg_lml(X, y_standardized)(theta)


def _search_starts(d: int, rng: np.random.Generator) -> list[np.ndarray]:
    default = np.concatenate([[0.0], np.full(d, np.log(0.5)), [np.log(1e-4)]])
    starts = [default]
    for _ in range(_N_RESTARTS - 1):
        starts.append(
            np.concatenate(
                [
                    rng.uniform(np.log(0.1), np.log(10.0), 1),
                    rng.uniform(np.log(0.05), np.log(2.0), d),
                    rng.uniform(np.log(1e-6), np.log(1e-2), 1),
                ]
            )
        )
    return starts


def fit_gp(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    x_scale: np.ndarray | None = None,
    x_lower: np.ndarray | None = None,
) -> GPModel:
    """Fit a GP to unit-box inputs ``X`` and raw targets ``y``.

    ``x_scale`` and ``x_lower`` record the affine map from the original
    decision box to the unit box; the scale affects only the units of
    :func:`posterior_mean_gradient`, the lower corner is carried so callers
    can map raw queries themselves.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 2:
        raise InvalidDataError(f"need at least 2 training points, got {n}")
    if y.shape[0] != n:
        raise InvalidDataError(f"X has {n} rows but y has {y.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidDataError("training data contains non-finite values")
    scale = np.ones(d) if x_scale is None else np.asarray(x_scale, dtype=float)
    lower = np.zeros(d) if x_lower is None else np.asarray(x_lower, dtype=float)

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std < 1e-12:
        # Constant targets: standardization would divide by zero. Return the
        # prior with the constant as mean; alpha = 0 makes the mean exact.
        hyper = KernelHyper(1.0, np.full(d, 0.5), 1e-6)
        K = _kernel_cross(hyper, X, X)
        L, noise_eff = _chol_with_jitter(K, hyper.noise_variance)
        return GPModel(
            X_train=X.copy(),
            y_mean=y_mean,
            y_std=1.0,
            alpha=np.zeros(n),
            chol=L,
            hyper=KernelHyper(hyper.signal_variance, hyper.lengthscales, noise_eff),
            x_scale=scale,
            x_lower=lower,
        )

    ys = (y - y_mean) / y_std
    neg_lml = _make_neg_lml(X, ys)
    rng = np.random.default_rng(seed)

    best_theta = None
    best_val = np.inf
    with single_thread_blas():  # small kernels: BLAS threads only contend
        for start in _search_starts(d, rng):
            res = minimize(
                neg_lml,
                start,
                method="Nelder-Mead",
                options={"maxiter": _MAX_ITER, "fatol": _FATOL, "xatol": 1e-3},
            )
            if res.fun < best_val:
                best_val = res.fun
                best_theta = res.x

    hyper = KernelHyper(
        signal_variance=float(np.exp(best_theta[0])),
        lengthscales=np.exp(best_theta[1 : 1 + d]),
        noise_variance=float(np.exp(best_theta[1 + d])),
    )
    K = _kernel_cross(hyper, X, X)
    L, noise_eff = _chol_with_jitter(K, hyper.noise_variance)
    a = solve_triangular(L, ys, lower=True, check_finite=False)
    alpha = solve_triangular(L.T, a, lower=False, check_finite=False)
    return GPModel(
        X_train=X.copy(),
        y_mean=y_mean,
        y_std=y_std,
        alpha=alpha,
        chol=L,
        hyper=KernelHyper(hyper.signal_variance, hyper.lengthscales, noise_eff),
        x_scale=scale,
        x_lower=lower,
    )


def posterior(gp: GPModel, x: np.ndarray) -> tuple[float, float]:
    """Posterior mean and variance at a unit-box point, in raw target units."""
    mean, var = posterior_batch(gp, np.asarray(x, dtype=float)[None, :])
    return float(mean[0]), float(var[0])


def posterior_batch(gp: GPModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior for a batch of unit-box query points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("query points contain non-finite values")
    k_star = _kernel_cross(gp.hyper, gp.X_train, X)  # n x m
    mean = gp.y_mean + gp.y_std * (k_star.T @ gp.alpha)
    v = solve_triangular(gp.chol, k_star, lower=True, check_finite=False)
    var_std = gp.hyper.signal_variance - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var_std, 0.0) * gp.y_std**2
    return mean, var


def posterior_mean_gradient(gp: GPModel, x: np.ndarray) -> np.ndarray:
    """Gradient of the posterior mean at a unit-box point.

    Units are raw target per raw decision variable: the standardization and
    the unit-box normalization recorded at fit time are both unwound.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidDataError("query point contains non-finite values")
    k_star = _kernel_cross(gp.hyper, gp.X_train, x[None, :]).ravel()  # (n,)
    diff = x[None, :] - gp.X_train  # m x d
    grad_unit = -(k_star * gp.alpha) @ (diff / gp.hyper.lengthscales**2)
    return gp.y_std * grad_unit / gp.x_scale
