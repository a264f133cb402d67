"""Benchmark problem suite, problem registry, and Latin hypercube initialization.

All problems are box-constrained minimization problems on [0, 1]^d. The ZDT
family is bi-objective; the DTLZ family is used here with three objectives.
Additional problems (e.g. real-world design tasks) can be attached at runtime
through :func:`register_problem` without touching this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BoundsViolationError,
    InvalidArgumentError,
    InvalidDimensionError,
    UnsupportedProblemError,
)

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """A bounded black-box minimization problem with M objectives.

    The evaluator must be pure: repeated calls on the same input return
    bitwise-identical objective vectors.
    """

    name: str
    d: int
    M: int
    lower: np.ndarray
    upper: np.ndarray
    evaluator: Evaluator = field(repr=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.d < 1 or self.M < 2:
            raise InvalidArgumentError(f"need d >= 1 and M >= 2, got d={self.d}, M={self.M}")
        if lower.shape != (self.d,) or upper.shape != (self.d,):
            raise InvalidArgumentError("bounds must have shape (d,)")
        if not np.all(lower < upper):
            raise InvalidArgumentError("lower bounds must be strictly below upper bounds")


@dataclass(frozen=True)
class Archive:
    """Paired evaluated decision/objective matrices; rows are append-only."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if X.shape[0] != Y.shape[0]:
            raise InvalidArgumentError(
                f"decision rows ({X.shape[0]}) and objective rows ({Y.shape[0]}) differ"
            )
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def extended(self, X_new: np.ndarray, Y_new: np.ndarray) -> "Archive":
        """New archive with the given rows appended; existing rows unchanged."""
        return Archive(
            X=np.vstack([self.X, np.atleast_2d(X_new)]),
            Y=np.vstack([self.Y, np.atleast_2d(Y_new)]),
        )


def evaluate(spec: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the true objective vector at ``x``, enforcing the box bounds."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise InvalidArgumentError(f"expected shape ({spec.d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise BoundsViolationError("decision vector contains non-finite entries")
    if np.any(x < spec.lower) or np.any(x > spec.upper):
        raise BoundsViolationError(f"decision vector outside bounds for problem {spec.name!r}")
    y = np.asarray(spec.evaluator(x), dtype=float)
    return y


# ---------------------------------------------------------------------------
# ZDT family (2 objectives, x in [0, 1]^d, d >= 2)
# ---------------------------------------------------------------------------


def _zdt_g(x: np.ndarray) -> float:
    return 1.0 + 9.0 * np.sum(x[1:]) / (x.size - 1)


def _zdt1(x: np.ndarray) -> np.ndarray:
    f1 = x[0]
    g = _zdt_g(x)
    return np.array([f1, g * (1.0 - np.sqrt(f1 / g))])


def _zdt2(x: np.ndarray) -> np.ndarray:
    f1 = x[0]
    g = _zdt_g(x)
    return np.array([f1, g * (1.0 - (f1 / g) ** 2)])


def _zdt3(x: np.ndarray) -> np.ndarray:
    f1 = x[0]
    g = _zdt_g(x)
    h = 1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1)
    return np.array([f1, g * h])


# ---------------------------------------------------------------------------
# DTLZ family (3 objectives here; k = d - M + 1 distance variables)
# ---------------------------------------------------------------------------


def _dtlz_shape(theta: np.ndarray, g: float, M: int) -> np.ndarray:
    """Concave hypersphere shape shared by DTLZ2-6: products of cos with a
    trailing sin."""
    f = np.full(M, 1.0 + g)
    for i in range(M):
        f[i] *= np.prod(np.cos(theta[: M - i - 1]))
        if i > 0:
            f[i] *= np.sin(theta[M - i - 1])
    return f


def _dtlz2(x: np.ndarray, M: int) -> np.ndarray:
    xm = x[M - 1 :]
    g = np.sum((xm - 0.5) ** 2)
    return _dtlz_shape(x[: M - 1] * (np.pi / 2), g, M)


def _dtlz3(x: np.ndarray, M: int) -> np.ndarray:
    xm = x[M - 1 :]
    g = 100.0 * (xm.size + np.sum((xm - 0.5) ** 2 - np.cos(20.0 * np.pi * (xm - 0.5))))
    return _dtlz_shape(x[: M - 1] * (np.pi / 2), g, M)


def _dtlz4(x: np.ndarray, M: int, alpha: float = 100.0) -> np.ndarray:
    xm = x[M - 1 :]
    g = np.sum((xm - 0.5) ** 2)
    return _dtlz_shape(x[: M - 1] ** alpha * (np.pi / 2), g, M)


def _dtlz5_theta(x: np.ndarray, g: float, M: int) -> np.ndarray:
    # Degenerate mapping: all position variables after the first are pinched
    # toward pi/4 as g -> 0, collapsing the front to a curve.
    theta = np.empty(M - 1)
    theta[0] = x[0] * (np.pi / 2)
    theta[1:] = (np.pi / (4.0 * (1.0 + g))) * (1.0 + 2.0 * g * x[1 : M - 1])
    return theta


def _dtlz5(x: np.ndarray, M: int) -> np.ndarray:
    xm = x[M - 1 :]
    g = np.sum((xm - 0.5) ** 2)
    return _dtlz_shape(_dtlz5_theta(x, g, M), g, M)


def _dtlz6(x: np.ndarray, M: int) -> np.ndarray:
    xm = x[M - 1 :]
    g = np.sum(xm**0.1)
    return _dtlz_shape(_dtlz5_theta(x, g, M), g, M)


def _dtlz7(x: np.ndarray, M: int) -> np.ndarray:
    xm = x[M - 1 :]
    g = 1.0 + 9.0 * np.mean(xm)
    f = np.empty(M)
    f[: M - 1] = x[: M - 1]
    h = M - np.sum(f[: M - 1] / (1.0 + g) * (1.0 + np.sin(3.0 * np.pi * f[: M - 1])))
    f[M - 1] = (1.0 + g) * h
    return f


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_ZDT = {"zdt1": _zdt1, "zdt2": _zdt2, "zdt3": _zdt3}
_DTLZ = {
    "dtlz2": _dtlz2,
    "dtlz3": _dtlz3,
    "dtlz4": _dtlz4,
    "dtlz5": _dtlz5,
    "dtlz6": _dtlz6,
    "dtlz7": _dtlz7,
}

_REGISTRY: dict[str, Callable[[int], ProblemSpec]] = {}


def register_problem(name: str, factory: Callable[[int], ProblemSpec]) -> None:
    """Attach an externally defined problem under a lowercase name."""
    _REGISTRY[name.lower()] = factory


def registered_problems() -> list[str]:
    return sorted(_REGISTRY)


def _make_zdt_factory(name: str, fn) -> Callable[[int], ProblemSpec]:
    def factory(d: int) -> ProblemSpec:
        if d < 2:
            raise InvalidDimensionError(f"{name} needs d >= 2, got {d}")
        return ProblemSpec(
            name=name, d=d, M=2, lower=np.zeros(d), upper=np.ones(d), evaluator=fn
        )

    return factory


def _make_dtlz_factory(name: str, fn, M: int = 3) -> Callable[[int], ProblemSpec]:
    def factory(d: int) -> ProblemSpec:
        if d < M:
            raise InvalidDimensionError(f"{name} with M={M} needs d >= {M}, got {d}")
        return ProblemSpec(
            name=name,
            d=d,
            M=M,
            lower=np.zeros(d),
            upper=np.ones(d),
            evaluator=lambda x, _fn=fn: _fn(x, M),
        )

    return factory


for _name, _fn in _ZDT.items():
    register_problem(_name, _make_zdt_factory(_name, _fn))
for _name, _fn in _DTLZ.items():
    register_problem(_name, _make_dtlz_factory(_name, _fn))


def make_problem(name: str, d: int) -> ProblemSpec:
    """Build a registered problem with ``d`` decision variables."""
    key = name.lower()
    if key not in _REGISTRY:
        raise UnsupportedProblemError(
            f"unknown problem {name!r}; available: {', '.join(registered_problems())}"
        )
    return _REGISTRY[key](d)


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def latin_hypercube(n: int, spec: ProblemSpec, seed: int) -> np.ndarray:
    """Stratified space-filling sample of ``n`` points within the bounds.

    Per dimension, the range is cut into ``n`` equal strata; a random
    permutation assigns one sample to each stratum and a uniform jitter
    places it inside. Fixed seed reproduces the exact sample matrix.
    """
    if n < 1:
        raise InvalidArgumentError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    unit = np.empty((n, spec.d))
    for j in range(spec.d):
        unit[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return spec.lower + unit * (spec.upper - spec.lower)
