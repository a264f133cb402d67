"""Elite extraction and gradient guidance for conditional sample generation.

Fitness combines convergence and diversity: each point's score is its shifted
distance to the nearest other point, where coordinates in which the other
point is better are shifted onto the point itself. Strictly dominated points
score zero; isolated non-dominated points score high.

Objective weights come from information entropy of the normalized objective
columns: columns whose values are spread carry more information and receive
more weight. The guidance vector is the negative weight-blended gradient of
the surrogate posterior means, expressed in the generative model's [-1, 1]
coordinates and norm-clipped.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, InvalidDataError, InvalidStateError
from .problems import Archive
from .surrogate import GPModel, posterior_mean_gradient

_ETA = 1e-12


def sde_fitness(Y: np.ndarray) -> np.ndarray:
    """Shift-based density fitness for each row of ``Y`` (higher is better)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[0]
    if n < 2:
        raise InvalidArgumentError(f"fitness needs at least 2 points, got {n}")
    # shifted[i, j] = distance from i to j after clamping improvements of j to 0
    diff = np.maximum(Y[None, :, :] - Y[:, None, :], 0.0)
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def extract_indices(Y: np.ndarray, count: int) -> np.ndarray:
    """Row indices of the ``count`` best rows by shift-based fitness.

    Ties resolve to the smaller row index; asking for at least as many rows as
    exist returns every index in natural order.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if count < 1:
        raise InvalidArgumentError(f"need count >= 1, got {count}")
    n = Y.shape[0]
    if count >= n:
        return np.arange(n)
    fitness = sde_fitness(Y)
    order = np.argsort(-fitness, kind="stable")
    return order[:count]


def extract_training_set(archive: Archive, count: int) -> np.ndarray:
    """Decision vectors of the archive rows with the highest shift-based fitness."""
    if archive.n == 0:
        raise InvalidDataError("cannot extract from an empty archive")
    return archive.X[extract_indices(archive.Y, count)].copy()


def entropy_weights(Y: np.ndarray) -> np.ndarray:
    """Per-objective weights from information entropy; nonnegative, sum to 1.

    A constant column carries no information and receives weight zero (its
    entropy is pinned at the uniform limit); if every column is constant the
    weights fall back to uniform.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = Y.shape
    if n < 2:
        raise InvalidArgumentError(f"entropy weights need at least 2 rows, got {n}")
    col_min = Y.min(axis=0)
    col_max = Y.max(axis=0)
    spread = col_max - col_min
    entropy = np.ones(m)  # degenerate columns stay at the uniform limit
    for j in range(m):
        if spread[j] <= 0.0:
            continue
        yt = (Y[:, j] - col_min[j]) / spread[j]
        p = yt / yt.sum()
        terms = np.where(p > 0.0, p * np.log(p + _ETA), 0.0)
        entropy[j] = -terms.sum() / np.log(n)
    info = 1.0 - entropy
    total = info.sum()
    if total <= 0.0:
        return np.full(m, 1.0 / m)
    return info / total


def weighted_gradient(
    gps: list[GPModel],
    weights: np.ndarray,
    x: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_norm: float = 1.0,
) -> np.ndarray:
    """Guidance vector at a sample ``x`` in [-1, 1]^d coordinates.

    The sample is mapped (clipped) into the decision box, each surrogate's
    posterior-mean gradient is blended with the given weights, negated to
    point downhill, re-expressed in [-1, 1] coordinates, and norm-clipped.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("sample contains non-finite values")
    if len(gps) != len(weights):
        raise InvalidStateError(f"{len(gps)} models but {len(weights)} weights")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x_unit = (np.clip(x, -1.0, 1.0) + 1.0) / 2.0
    grad = np.zeros_like(x)
    for w, gp in zip(weights, gps):
        if w == 0.0:
            continue
        grad += w * posterior_mean_gradient(gp, x_unit)
    # chain rule decision box -> [-1, 1] coordinates, then descend
    g_hat = -grad * (upper - lower) / 2.0
    norm = float(np.linalg.norm(g_hat))
    if norm > max_norm > 0.0:
        g_hat *= max_norm / norm
    return g_hat


def make_guidance(
    gps: list[GPModel],
    weights: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_norm: float = 1.0,
):
    """Bind surrogates, weights, and bounds into a per-sample guidance callable."""

    def guidance(x: np.ndarray) -> np.ndarray:
        return weighted_gradient(gps, weights, x, lower, upper, max_norm)

    return guidance
