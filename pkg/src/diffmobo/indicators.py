"""Dominance predicates, non-dominated filtering, and hypervolume computation.

Minimization convention throughout. Exact hypervolume is implemented for two
objectives (sorted sweep) and three objectives (slicing along the third axis
into 2-D sweeps); a Monte-Carlo estimator with reported standard error serves
as an independent cross-check and as the fallback for higher dimensions.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, InvalidDataError, UnsupportedDimensionError


def dominates(p: np.ndarray, q: np.ndarray) -> bool:
    """True iff ``p`` is no worse than ``q`` everywhere and better somewhere."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidArgumentError(f"length mismatch: {p.shape} vs {q.shape}")
    return bool(np.all(p <= q) and np.any(p < q))


def nondominated_filter(Y: np.ndarray) -> np.ndarray:
    """Indices of rows of ``Y`` not dominated by any other row.

    Duplicate rows are all retained (a copy never strictly dominates its twin).
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[0]
    keep = np.empty(n, dtype=bool)
    for i in range(n):
        le = np.all(Y <= Y[i], axis=1)
        lt = np.any(Y < Y[i], axis=1)
        keep[i] = not np.any(le & lt)
    return np.flatnonzero(keep)


def reference_point(Y_init: np.ndarray) -> np.ndarray:
    """Componentwise maximum of the initial objective sample.

    Computed once after initialization and frozen for the whole run so that
    hypervolume growth is comparable across iterations.
    """
    Y_init = np.asarray(Y_init, dtype=float)
    if Y_init.size == 0:
        raise InvalidDataError("reference point needs at least one objective vector")
    return np.max(np.atleast_2d(Y_init), axis=0)


def _hv_2d(points: np.ndarray, r: np.ndarray) -> float:
    """Exact 2-D hypervolume by a single sweep over the sorted staircase."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]
    hv = 0.0
    best_f2 = r[1]
    for f1, f2 in pts:
        if f2 < best_f2:
            hv += (r[0] - f1) * (best_f2 - f2)
            best_f2 = f2
    return hv


def hypervolume(S: np.ndarray, r: np.ndarray) -> float:
    """Exact Lebesgue measure dominated by ``S`` and bounded by ``r``.

    Points with any coordinate beyond the reference point contribute nothing;
    an empty or fully non-contributing set yields 0.
    """
    r = np.asarray(r, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 0.0
    S = np.atleast_2d(S)
    M = r.shape[0]
    if S.shape[1] != M:
        raise InvalidArgumentError(f"points have {S.shape[1]} objectives, reference has {M}")
    if M not in (2, 3):
        raise UnsupportedDimensionError(
            f"exact hypervolume supports 2 or 3 objectives, got {M}; use hypervolume_mc"
        )
    S = S[np.all(S <= r, axis=1)]
    if S.shape[0] == 0:
        return 0.0
    if M == 2:
        return _hv_2d(S, r)
    # Slice along the third objective: within slab [z_k, z_{k+1}) the dominated
    # 2-D region is fixed, so the volume is a stack of prisms.
    z = np.unique(S[:, 2])
    edges = np.append(z, r[2])
    hv = 0.0
    for k in range(z.size):
        width = edges[k + 1] - edges[k]
        if width <= 0.0:
            continue
        active = S[S[:, 2] <= z[k], :2]
        hv += width * _hv_2d(active, r[:2])
    return hv


def hypervolume_mc(
    S: np.ndarray, r: np.ndarray, n_samples: int, seed: int
) -> tuple[float, float]:
    """Monte-Carlo hypervolume estimate with its standard error.

    Uniform samples are drawn in the box spanned by the componentwise minimum
    of ``S`` and the reference point; the dominated fraction scales the box
    volume.
    """
    r = np.asarray(r, dtype=float)
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return 0.0, 0.0
    S = np.atleast_2d(S)
    lo = np.minimum(S.min(axis=0), r)
    box = float(np.prod(r - lo))
    if box <= 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    q = lo + rng.random((n_samples, r.shape[0])) * (r - lo)
    covered = np.zeros(n_samples, dtype=bool)
    for p in S:
        covered |= np.all(q >= p, axis=1)
    frac = covered.mean()
    stderr = box * float(np.sqrt(frac * (1.0 - frac) / n_samples))
    return box * float(frac), stderr
