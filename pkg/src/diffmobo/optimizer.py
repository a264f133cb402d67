"""Surrogate-assisted optimization loop with composite-diffusion offspring.

Each iteration fits one GP per objective, extracts an elite training set by
shift-based fitness, generates candidate offspring (guided + unconditional
diffusion samples, or a genetic fallback), greedily picks the batch that most
expands predicted hypervolume, evaluates it on the true problem, and appends
to the archive. A flag toggles the generator whenever hypervolume growth over
a trailing window stalls.

All randomness fans out from one master seed into named per-component,
per-iteration streams, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._blas import single_thread_blas
from .diffusion import (
    GenerationConfig,
    TrainConfig,
    generate_composite,
    make_net,
    make_schedule,
    train,
)
from .errors import InvalidArgumentError, InvalidStateError
from .guidance import entropy_weights, extract_indices, make_guidance, sde_fitness
from .indicators import hypervolume, nondominated_filter, reference_point
from .problems import Archive, ProblemSpec, evaluate, latin_hypercube
from .surrogate import GPModel, fit_gp, posterior_batch

GENERATORS = ("composite", "ga", "random")
SWITCH_MODES = ("sliding", "blocked")
WEIGHT_MODES = ("entropy", "uniform")


@dataclass(frozen=True)
class RunConfig:
    n_init: int = 100
    iterations: int = 20
    batch: int = 5
    extraction_fraction: float = 1.0 / 3.0
    switch_window: int = 3
    switch_threshold: float = 0.05
    switch_mode: str = "sliding"
    generator: str = "composite"
    weight_mode: str = "entropy"
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    schedule_steps: int = 25
    schedule_beta_min: float = 1e-5
    schedule_beta_max: float = 5e-2
    seed: int = 0

    def __post_init__(self):
        if self.batch < 1 or self.iterations < 0 or self.n_init < 2:
            raise InvalidArgumentError("need batch >= 1, iterations >= 0, n_init >= 2")
        if not 0.0 < self.extraction_fraction <= 1.0:
            raise InvalidArgumentError("extraction_fraction must lie in (0, 1]")
        if self.switch_window < 1 or self.switch_threshold < 0.0:
            raise InvalidArgumentError("need switch_window >= 1 and switch_threshold >= 0")
        if self.switch_mode not in SWITCH_MODES:
            raise InvalidArgumentError(f"switch_mode must be one of {SWITCH_MODES}")
        if self.generator not in GENERATORS:
            raise InvalidArgumentError(f"generator must be one of {GENERATORS}")
        if self.weight_mode not in WEIGHT_MODES:
            raise InvalidArgumentError(f"weight_mode must be one of {WEIGHT_MODES}")


@dataclass(frozen=True)
class SwitchState:
    """Generator flag plus the hypervolume history that drives it."""

    use_cdm: bool = True
    hv_history: tuple[float, ...] = ()

    def recorded(self, hv: float) -> "SwitchState":
        return replace(self, hv_history=self.hv_history + (hv,))


def update_switch(
    state: SwitchState, w: int, threshold: float, mode: str = "sliding"
) -> SwitchState:
    """Invert the generator flag when windowed hypervolume growth stalls.

    Growth is measured relative to the value ``w`` entries back, guarded
    against a zero baseline. With fewer than ``w + 1`` recorded values the
    state is returned unchanged; in blocked mode checks only fire at window
    boundaries.
    """
    hist = state.hv_history
    if len(hist) < w + 1:
        return state
    completed = len(hist) - 1
    if mode == "blocked" and completed % w != 0:
        return state
    prev = hist[-1 - w]
    rate = (hist[-1] - prev) / max(prev, 1e-12)
    if rate < threshold:
        return replace(state, use_cdm=not state.use_cdm)
    return state


@dataclass(frozen=True)
class RunResult:
    archive: Archive
    hv_curve: tuple[tuple[int, float], ...]  # (cumulative evaluations, hypervolume)
    switch_trace: tuple[bool, ...]
    front: np.ndarray
    seed: int
    timings: dict[str, float]
    iteration_seconds: tuple[float, ...] = ()  # init phase, then one per iteration


def derive_seed(master: int, *tags: int) -> int:
    """Deterministic child seed for a named component stream."""
    return int(np.random.SeedSequence([master, *tags]).generate_state(1)[0])


def greedy_hv_indices(preds: np.ndarray, front: np.ndarray, r: np.ndarray, B: int) -> list[int]:
    """Indices of ``B`` predicted points chosen greedily to maximize the
    hypervolume of the growing union with ``front``; ties go to the lowest
    index, and chosen points leave the pool."""
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    m = preds.shape[0]
    if B < 1 or m < B:
        raise InvalidArgumentError(f"need candidates >= B >= 1, got m={m}, B={B}")
    front = np.atleast_2d(np.asarray(front, dtype=float)).reshape(-1, preds.shape[1])
    remaining = list(range(m))
    chosen: list[int] = []
    for _ in range(B):
        best_idx = remaining[0]
        best_hv = -np.inf
        for idx in remaining:
            hv = hypervolume(np.vstack([front, preds[idx]]), r)
            if hv > best_hv:
                best_hv = hv
                best_idx = idx
        chosen.append(best_idx)
        remaining.remove(best_idx)
        front = np.vstack([front, preds[best_idx]])
    return chosen


def batch_select(
    candidates: np.ndarray,
    gps: list[GPModel],
    archive: Archive,
    r: np.ndarray,
    B: int,
) -> np.ndarray:
    """Greedy hypervolume-maximizing pick of ``B`` candidate decision vectors.

    Candidates are judged by their surrogate-predicted objective vectors
    against the archive's observed non-dominated front; the observed front is
    taken as-is and never re-predicted. Ties go to the lowest candidate index.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    lower, upper = _gp_box(gps)
    unit = (candidates - lower) / (upper - lower)
    preds = np.column_stack([posterior_batch(gp, unit)[0] for gp in gps])
    front = archive.Y[nondominated_filter(archive.Y)]
    chosen = greedy_hv_indices(preds, front, r, B)
    return candidates[chosen].copy()


def _gp_box(gps: list[GPModel]) -> tuple[np.ndarray, np.ndarray]:
    if not gps:
        raise InvalidStateError("batch selection needs at least one fitted surrogate")
    scale = gps[0].x_scale
    lower = gps[0].x_lower
    return lower, lower + scale


def ga_offspring(
    archive: Archive,
    n_out: int,
    spec: ProblemSpec,
    seed: int,
    crossover_eta: float = 15.0,
    crossover_rate: float = 0.9,
    mutation_eta: float = 20.0,
    mutation_rate: float | None = None,
) -> np.ndarray:
    """Genetic offspring: fitness tournaments, simulated binary crossover,
    polynomial mutation, all clipped to the problem bounds."""
    if archive.n < 2:
        raise InvalidStateError(f"genetic offspring needs an archive of >= 2, got {archive.n}")
    if n_out < 1:
        raise InvalidArgumentError(f"need n_out >= 1, got {n_out}")
    rng = np.random.default_rng(seed)
    d = spec.d
    lo, hi = spec.lower, spec.upper
    p_mut = (1.0 / d) if mutation_rate is None else mutation_rate
    fitness = sde_fitness(archive.Y)

    def tournament() -> np.ndarray:
        a, b = rng.integers(0, archive.n, 2)
        return archive.X[a] if fitness[a] >= fitness[b] else archive.X[b]

    children: list[np.ndarray] = []
    while len(children) < n_out:
        p1, p2 = tournament().copy(), tournament().copy()
        c1, c2 = _sbx_pair(p1, p2, crossover_eta, crossover_rate, rng)
        for c in (c1, c2):
            _polynomial_mutation(c, lo, hi, mutation_eta, p_mut, rng)
            np.clip(c, lo, hi, out=c)
            children.append(c)
    return np.stack(children[:n_out])


def _sbx_pair(
    p1: np.ndarray, p2: np.ndarray, eta: float, rate: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    c1, c2 = p1.copy(), p2.copy()
    for j in range(p1.shape[0]):
        if rng.random() > rate:
            continue
        if abs(p1[j] - p2[j]) < 1e-14:  # equal genes recombine to themselves
            continue
        u = rng.random()
        if u <= 0.5:
            beta = (2.0 * u) ** (1.0 / (eta + 1.0))
        else:
            beta = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
        c1[j] = 0.5 * ((1.0 + beta) * p1[j] + (1.0 - beta) * p2[j])
        c2[j] = 0.5 * ((1.0 - beta) * p1[j] + (1.0 + beta) * p2[j])
    return c1, c2


def _polynomial_mutation(
    x: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    eta: float,
    rate: float,
    rng: np.random.Generator,
) -> None:
    for j in range(x.shape[0]):
        if rng.random() > rate:
            continue
        span = hi[j] - lo[j]
        u = rng.random()
        d1 = (x[j] - lo[j]) / span
        d2 = (hi[j] - x[j]) / span
        if u < 0.5:
            dq = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** (
                1.0 / (eta + 1.0)
            ) - 1.0
        else:
            dq = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** (
                1.0 / (eta + 1.0)
            )
        x[j] += dq * span


def _to_model_coords(X: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    return 2.0 * (X - spec.lower) / (spec.upper - spec.lower) - 1.0


def _from_model_coords(S: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    return spec.lower + (np.clip(S, -1.0, 1.0) + 1.0) / 2.0 * (spec.upper - spec.lower)


def run(spec: ProblemSpec, cfg: RunConfig) -> RunResult:
    """Execute the full optimization loop and return the evaluated archive,
    the hypervolume trajectory, and the generator-flag trace."""
    with single_thread_blas():
        return _run_loop(spec, cfg)


def _run_loop(spec: ProblemSpec, cfg: RunConfig) -> RunResult:
    timings = {"gp_fit": 0.0, "dm_train": 0.0, "generate": 0.0, "select": 0.0, "evaluate": 0.0}
    t_run = time.perf_counter()
    iteration_seconds: list[float] = []

    X0 = latin_hypercube(cfg.n_init, spec, derive_seed(cfg.seed, 0))
    t0 = time.perf_counter()
    Y0 = np.stack([evaluate(spec, x) for x in X0])
    timings["evaluate"] += time.perf_counter() - t0
    archive = Archive(X=X0, Y=Y0)
    iteration_seconds.append(time.perf_counter() - t_run)

    ref = reference_point(Y0)
    hv0 = hypervolume(archive.Y[nondominated_filter(archive.Y)], ref)
    hv_curve = [(cfg.n_init, hv0)]
    state = SwitchState(use_cdm=True, hv_history=(hv0,))
    switch_trace: list[bool] = []
    pool_size = cfg.generation.n_conditional + cfg.generation.n_unconditional
    sched = make_schedule(cfg.schedule_steps, cfg.schedule_beta_min, cfg.schedule_beta_max)
    unit_scale = spec.upper - spec.lower

    for k in range(cfg.iterations):
        t_iter = time.perf_counter()
        t0 = time.perf_counter()
        gps = [
            fit_gp(
                (archive.X - spec.lower) / unit_scale,
                archive.Y[:, j],
                derive_seed(cfg.seed, 1, k, j),
                x_scale=unit_scale,
                x_lower=spec.lower,
            )
            for j in range(spec.M)
        ]
        timings["gp_fit"] += time.perf_counter() - t0

        count = math.ceil(cfg.extraction_fraction * archive.n)
        elite_idx = extract_indices(archive.Y, count)
        X_elite = archive.X[elite_idx]
        Y_elite = archive.Y[elite_idx]

        use_composite = cfg.generator == "composite" and state.use_cdm
        switch_trace.append(use_composite)

        if use_composite:
            t0 = time.perf_counter()
            net = make_net(spec.d, derive_seed(cfg.seed, 2, k))
            net, _ = train(
                net, _to_model_coords(X_elite, spec), sched, cfg.train, derive_seed(cfg.seed, 3, k)
            )
            timings["dm_train"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            if cfg.weight_mode == "entropy":
                weights = entropy_weights(Y_elite)
            else:
                weights = np.full(spec.M, 1.0 / spec.M)
            guide = make_guidance(
                gps, weights, spec.lower, spec.upper, cfg.generation.max_gradient_norm
            )
            samples = generate_composite(
                net, sched, cfg.generation, guide, derive_seed(cfg.seed, 4, k)
            )
            candidates = _from_model_coords(samples, spec)
            timings["generate"] += time.perf_counter() - t0
        elif cfg.generator == "random":
            rng = np.random.default_rng(derive_seed(cfg.seed, 6, k))
            candidates = spec.lower + rng.random((pool_size, spec.d)) * unit_scale
        else:
            candidates = ga_offspring(archive, pool_size, spec, derive_seed(cfg.seed, 5, k))

        t0 = time.perf_counter()
        batch = batch_select(candidates, gps, archive, ref, cfg.batch)
        timings["select"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        Y_batch = np.stack([evaluate(spec, x) for x in batch])
        timings["evaluate"] += time.perf_counter() - t0
        archive = archive.extended(batch, Y_batch)

        hv = hypervolume(archive.Y[nondominated_filter(archive.Y)], ref)
        hv_curve.append((cfg.n_init + (k + 1) * cfg.batch, hv))
        state = state.recorded(hv)
        if cfg.generator == "composite":
            state = update_switch(state, cfg.switch_window, cfg.switch_threshold, cfg.switch_mode)
        iteration_seconds.append(time.perf_counter() - t_iter)

    timings["total"] = time.perf_counter() - t_run
    front = archive.Y[nondominated_filter(archive.Y)]
    return RunResult(
        archive=archive,
        hv_curve=tuple(hv_curve),
        switch_trace=tuple(switch_trace),
        front=front,
        seed=cfg.seed,
        timings=timings,
        iteration_seconds=tuple(iteration_seconds),
    )
