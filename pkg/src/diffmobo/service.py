"""FastAPI service wrapping the experiment harness.

Optimization runs take minutes, so run and experiment submissions return a
job id immediately; clients poll ``GET /jobs/{id}`` until the job settles.
Jobs execute in a small in-process worker pool and write their artifacts to
the server-side output directory.
"""

from __future__ import annotations

import itertools
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, replace

from fastapi import FastAPI, HTTPException

from . import __version__
from .diffusion import GenerationConfig, TrainConfig
from .errors import ConfigError, DiffmoboError
from .harness import (
    ExperimentConfig,
    ExperimentSummary,
    VARIANTS,
    emit_plot,
    execute_experiment,
    parse_config,
)
from .optimizer import RunConfig
from .problems import make_problem, registered_problems
from .schemas import (
    ExperimentRequest,
    ExperimentSummaryModel,
    HealthResponse,
    JobCreated,
    JobStatus,
    PlotRequest,
    PlotResponse,
    ProblemInfo,
    ProblemListResponse,
    RunOverrides,
    RunRequest,
)


class JobStore:
    """Tracks submitted jobs and their futures."""

    def __init__(self, workers: int = 2):
        self._executor = ThreadPoolExecutor(max_workers=workers)
        self._jobs: dict[str, Future] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def submit(self, fn) -> str:
        with self._lock:
            job_id = f"job-{next(self._counter)}"
            self._jobs[job_id] = self._executor.submit(fn)
        return job_id

    def status(self, job_id: str) -> JobStatus:
        with self._lock:
            future = self._jobs.get(job_id)
        if future is None:
            raise KeyError(job_id)
        if not future.done():
            state = "running" if future.running() else "pending"
            return JobStatus(job_id=job_id, state=state)
        exc = future.exception()
        if exc is not None:
            return JobStatus(job_id=job_id, state="failed", detail=f"{type(exc).__name__}: {exc}")
        summary: ExperimentSummary = future.result()
        model = ExperimentSummaryModel(
            cells=[asdict(c) for c in summary.cells],
            median_final_hv=summary.median_final_hv,
            output_dir=summary.output_dir,
            failed=summary.failed,
        )
        state = "failed" if summary.failed else "done"
        detail = None
        if summary.failed:
            errors = [c.error for c in summary.cells if c.error]
            detail = "; ".join(errors[:3])
        return JobStatus(job_id=job_id, state=state, detail=detail, result=model)


def build_run_config(overrides: RunOverrides, base: RunConfig | None = None) -> RunConfig:
    """Apply sparse request overrides on top of the default run configuration."""
    cfg = base or RunConfig()
    gen = cfg.generation
    tr = cfg.train

    def pick(value, default):
        return default if value is None else value

    return replace(
        cfg,
        n_init=pick(overrides.n_init, cfg.n_init),
        iterations=pick(overrides.iterations, cfg.iterations),
        batch=pick(overrides.batch, cfg.batch),
        extraction_fraction=pick(overrides.extraction_fraction, cfg.extraction_fraction),
        switch_window=pick(overrides.switch_window, cfg.switch_window),
        switch_threshold=pick(overrides.switch_threshold, cfg.switch_threshold),
        switch_mode=pick(overrides.switch_mode, cfg.switch_mode),
        generation=GenerationConfig(
            n_conditional=pick(overrides.n_conditional, gen.n_conditional),
            n_unconditional=pick(overrides.n_unconditional, gen.n_unconditional),
            max_gradient_norm=pick(overrides.max_gradient_norm, gen.max_gradient_norm),
        ),
        train=TrainConfig(
            epochs=pick(overrides.epochs, tr.epochs),
            batch=pick(overrides.train_batch, tr.batch),
            lr=pick(overrides.lr, tr.lr),
        ),
        schedule_steps=pick(overrides.steps, cfg.schedule_steps),
        schedule_beta_min=pick(overrides.beta_min, cfg.schedule_beta_min),
        schedule_beta_max=pick(overrides.beta_max, cfg.schedule_beta_max),
    )


def create_app(workers: int = 2) -> FastAPI:
    app = FastAPI(title="diffmobo service", version=__version__)
    jobs = JobStore(workers=workers)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(version=__version__)

    @app.get("/problems", response_model=ProblemListResponse)
    def list_problems():
        infos = []
        for name in registered_problems():
            # probe the factory for the family's smallest accepted dimension
            for d in range(1, 65):
                try:
                    spec = make_problem(name, d)
                    infos.append(
                        ProblemInfo(name=name, objectives=spec.M, min_dimension=d)
                    )
                    break
                except DiffmoboError:
                    continue
        return ProblemListResponse(problems=infos)

    @app.post("/runs", response_model=JobCreated, status_code=202)
    def submit_run(req: RunRequest):
        if req.variant not in VARIANTS:
            raise HTTPException(422, f"unknown variant {req.variant!r}; choose from {VARIANTS}")
        try:
            make_problem(req.problem, req.d)
            run_cfg = build_run_config(req.overrides)
            cfg = ExperimentConfig(
                problems=((req.problem.lower(), req.d),),
                seeds=(req.seed,),
                variant=req.variant,
                output_dir=req.output_dir,
                record_timing=req.record_timing,
                run=run_cfg,
            )
        except DiffmoboError as exc:
            raise HTTPException(422, str(exc)) from exc
        job_id = jobs.submit(lambda: execute_experiment(cfg))
        return JobCreated(job_id=job_id, status_url=f"/jobs/{job_id}")

    @app.post("/experiments", response_model=JobCreated, status_code=202)
    def submit_experiment(req: ExperimentRequest):
        try:
            cfg = parse_config(req.config_text)
            if req.output_dir is not None:
                cfg = replace(cfg, output_dir=req.output_dir)
        except ConfigError as exc:
            raise HTTPException(422, str(exc)) from exc
        job_id = jobs.submit(lambda: execute_experiment(cfg))
        return JobCreated(job_id=job_id, status_url=f"/jobs/{job_id}")

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str):
        try:
            return jobs.status(job_id)
        except KeyError:
            raise HTTPException(404, f"unknown job {job_id!r}") from None

    @app.post("/plots", response_model=PlotResponse)
    def make_plot(req: PlotRequest):
        try:
            medians_path = emit_plot(req.history_paths, req.out_path)
        except (DiffmoboError, OSError) as exc:
            raise HTTPException(422, str(exc)) from exc
        return PlotResponse(out_path=req.out_path, medians_path=str(medians_path))

    return app


app = create_app()
