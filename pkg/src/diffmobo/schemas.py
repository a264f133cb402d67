"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class ProblemInfo(BaseModel):
    name: str
    objectives: int
    min_dimension: int


class ProblemListResponse(BaseModel):
    problems: list[ProblemInfo]


class RunOverrides(BaseModel):
    """Optional overrides for the run configuration; unset fields keep defaults."""

    n_init: int | None = None
    iterations: int | None = None
    batch: int | None = None
    extraction_fraction: float | None = None
    switch_window: int | None = None
    switch_threshold: float | None = None
    switch_mode: str | None = None
    n_conditional: int | None = None
    n_unconditional: int | None = None
    max_gradient_norm: float | None = None
    epochs: int | None = None
    train_batch: int | None = None
    lr: float | None = None
    steps: int | None = None
    beta_min: float | None = None
    beta_max: float | None = None


class RunRequest(BaseModel):
    problem: str
    d: int = Field(ge=1)
    seed: int
    variant: str = "full"
    output_dir: str | None = None
    record_timing: bool = False
    overrides: RunOverrides = Field(default_factory=RunOverrides)


class ExperimentRequest(BaseModel):
    """A full experiment grid, submitted as a config document."""

    config_text: str
    output_dir: str | None = None  # overrides the document's output_dir key


class PlotRequest(BaseModel):
    history_paths: list[str]
    out_path: str


class PlotResponse(BaseModel):
    out_path: str
    medians_path: str


class JobCreated(BaseModel):
    job_id: str
    status_url: str


class CellResultModel(BaseModel):
    problem: str
    d: int
    seed: int
    variant: str
    status: str
    final_hv: float | None
    run_dir: str
    error: str | None = None


class ExperimentSummaryModel(BaseModel):
    cells: list[CellResultModel]
    median_final_hv: dict[str, float]
    output_dir: str
    failed: bool


class JobStatus(BaseModel):
    job_id: str
    state: str  # pending | running | done | failed
    detail: str | None = None
    result: ExperimentSummaryModel | None = None
