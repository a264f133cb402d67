"""Experiment harness: configuration, execution, persistence, and plots.

An experiment is a grid of (problem, seed) cells for one algorithm variant.
Each cell runs the full optimization loop and leaves exactly three files in
its run directory: a resolved config snapshot, a history file, and a final
front file. Identical configurations produce byte-identical history files;
wall-clock timings are therefore written as zero unless explicitly requested.

Config documents are flat ``key = value`` lines with optional ``[section]``
overrides; see the README for the full grammar.
"""

from __future__ import annotations

import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffusion import GenerationConfig, TrainConfig
from .errors import ConfigError, HistoryAlignmentError, InvalidDataError
from .indicators import nondominated_filter
from .optimizer import RunConfig, RunResult, run
from .problems import make_problem

VARIANTS = ("full", "no_weight", "no_condition", "no_switch", "no_dm", "random_baseline")

OUTPUT_DIR_ENV = "DIFFMOBO_OUTPUT_DIR"

HISTORY_COLUMNS = (
    "problem",
    "d",
    "seed",
    "variant",
    "iteration",
    "cumulative_fe",
    "hv",
    "f_cdm_flag",
    "wall_seconds",
)


@dataclass(frozen=True)
class HistoryRecord:
    problem: str
    d: int
    seed: int
    variant: str
    iteration: int
    cumulative_fe: int
    hv: float
    f_cdm_flag: bool
    wall_seconds: float


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple[tuple[str, int], ...]
    seeds: tuple[int, ...]
    variant: str = "full"
    output_dir: str | None = None
    workers: int = 1
    record_timing: bool = False
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        if not self.problems:
            raise ConfigError("config must name at least one problem")
        if not self.seeds:
            raise ConfigError("config must name at least one seed")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def apply_variant(cfg: RunConfig, variant: str) -> RunConfig:
    """Rewire a run config for one of the ablation variants."""
    if variant == "full":
        return cfg
    if variant == "no_weight":
        return replace(cfg, weight_mode="uniform")
    if variant == "no_condition":
        pool = cfg.generation.n_conditional + cfg.generation.n_unconditional
        return replace(
            cfg,
            generation=replace(cfg.generation, n_conditional=0, n_unconditional=pool),
        )
    if variant == "no_switch":
        return replace(cfg, switch_threshold=0.0)
    if variant == "no_dm":
        return replace(cfg, generator="ga")
    if variant == "random_baseline":
        return replace(cfg, generator="random")
    raise ConfigError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Config document parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"problems", "seeds", "variant", "output_dir", "workers", "record_timing"}
_SECTION_KEYS = {
    "run": {
        "n_init",
        "iterations",
        "batch",
        "extraction_fraction",
        "switch_window",
        "switch_threshold",
        "switch_mode",
    },
    "generation": {"n_conditional", "n_unconditional", "max_gradient_norm"},
    "train": {"epochs", "batch", "lr"},
    "schedule": {"steps", "beta_min", "beta_max"},
}


def _parse_scalar(raw: str, kind: type, line_no: int):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse a config document into a validated experiment configuration."""
    top: dict[str, object] = {}
    sections: dict[str, dict[str, object]] = {name: {} for name in _SECTION_KEYS}
    section = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                raise ConfigError(f"line {line_no}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            top[key] = (value, line_no)
        else:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"line {line_no}: unknown key {key!r} in [{section}]")
            sections[section][key] = (value, line_no)

    if "problems" not in top:
        raise ConfigError("config must name at least one problem")
    if "seeds" not in top:
        raise ConfigError("config must name at least one seed")

    problems = []
    raw, line_no = top["problems"]
    for item in str(raw).split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"line {line_no}: problem {item!r} must look like name:dimension")
        name, _, dim = item.partition(":")
        problems.append((name.strip().lower(), _parse_scalar(dim.strip(), int, line_no)))
    if not problems:
        raise ConfigError(f"line {line_no}: empty problems list")

    raw, line_no = top["seeds"]
    seeds = tuple(
        _parse_scalar(item.strip(), int, line_no) for item in str(raw).split(",") if item.strip()
    )
    if not seeds:
        raise ConfigError(f"line {line_no}: empty seeds list")

    def top_value(key: str, kind: type, default):
        if key not in top:
            return default
        value, ln = top[key]
        return _parse_scalar(value, kind, ln) if kind is not str else value

    def section_value(name: str, key: str, kind: type, default):
        if key not in sections[name]:
            return default
        value, ln = sections[name][key]
        return _parse_scalar(value, kind, ln) if kind is not str else value

    base = RunConfig()
    run_cfg = replace(
        base,
        n_init=section_value("run", "n_init", int, base.n_init),
        iterations=section_value("run", "iterations", int, base.iterations),
        batch=section_value("run", "batch", int, base.batch),
        extraction_fraction=section_value(
            "run", "extraction_fraction", float, base.extraction_fraction
        ),
        switch_window=section_value("run", "switch_window", int, base.switch_window),
        switch_threshold=section_value("run", "switch_threshold", float, base.switch_threshold),
        switch_mode=section_value("run", "switch_mode", str, base.switch_mode),
        generation=GenerationConfig(
            n_conditional=section_value(
                "generation", "n_conditional", int, base.generation.n_conditional
            ),
            n_unconditional=section_value(
                "generation", "n_unconditional", int, base.generation.n_unconditional
            ),
            max_gradient_norm=section_value(
                "generation", "max_gradient_norm", float, base.generation.max_gradient_norm
            ),
        ),
        train=TrainConfig(
            epochs=section_value("train", "epochs", int, base.train.epochs),
            batch=section_value("train", "batch", int, base.train.batch),
            lr=section_value("train", "lr", float, base.train.lr),
        ),
        schedule_steps=section_value("schedule", "steps", int, base.schedule_steps),
        schedule_beta_min=section_value("schedule", "beta_min", float, base.schedule_beta_min),
        schedule_beta_max=section_value("schedule", "beta_max", float, base.schedule_beta_max),
    )

    return ExperimentConfig(
        problems=tuple(problems),
        seeds=seeds,
        variant=top_value("variant", str, "full"),
        output_dir=top_value("output_dir", str, None),
        workers=top_value("workers", int, 1),
        record_timing=top_value("record_timing", bool, False),
        run=run_cfg,
    )


def render_config(cfg: ExperimentConfig) -> str:
    """Render a configuration back into the document grammar, fully resolved."""
    lines = [
        "problems = " + ", ".join(f"{name}:{d}" for name, d in cfg.problems),
        "seeds = " + ", ".join(str(s) for s in cfg.seeds),
        f"variant = {cfg.variant}",
    ]
    if cfg.output_dir is not None:
        lines.append(f"output_dir = {cfg.output_dir}")
    lines += [
        f"workers = {cfg.workers}",
        f"record_timing = {str(cfg.record_timing).lower()}",
        "",
        "[run]",
        f"n_init = {cfg.run.n_init}",
        f"iterations = {cfg.run.iterations}",
        f"batch = {cfg.run.batch}",
        f"extraction_fraction = {cfg.run.extraction_fraction!r}",
        f"switch_window = {cfg.run.switch_window}",
        f"switch_threshold = {cfg.run.switch_threshold!r}",
        f"switch_mode = {cfg.run.switch_mode}",
        "",
        "[generation]",
        f"n_conditional = {cfg.run.generation.n_conditional}",
        f"n_unconditional = {cfg.run.generation.n_unconditional}",
        f"max_gradient_norm = {cfg.run.generation.max_gradient_norm!r}",
        "",
        "[train]",
        f"epochs = {cfg.run.train.epochs}",
        f"batch = {cfg.run.train.batch}",
        f"lr = {cfg.run.train.lr!r}",
        "",
        "[schedule]",
        f"steps = {cfg.run.schedule_steps}",
        f"beta_min = {cfg.run.schedule_beta_min!r}",
        f"beta_max = {cfg.run.schedule_beta_max!r}",
    ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# History files
# ---------------------------------------------------------------------------


def history_from_result(
    result: RunResult,
    problem: str,
    d: int,
    seed: int,
    variant: str,
    wall_seconds: tuple[float, ...] | None = None,
) -> list[HistoryRecord]:
    """Flatten a run result into one record per recorded hypervolume value."""
    records = []
    for i, (fe, hv) in enumerate(result.hv_curve):
        flag = True if i == 0 else result.switch_trace[i - 1]
        wall = 0.0 if wall_seconds is None else wall_seconds[i]
        records.append(
            HistoryRecord(
                problem=problem,
                d=d,
                seed=seed,
                variant=variant,
                iteration=i,
                cumulative_fe=fe,
                hv=hv,
                f_cdm_flag=flag,
                wall_seconds=wall,
            )
        )
    return records


def write_history(records: list[HistoryRecord], path: str | Path) -> None:
    """Write records as comma-separated text: header row, 10-significant-digit
    decimals, newline-terminated."""
    path = Path(path)
    lines = [",".join(HISTORY_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.problem,
                    str(r.d),
                    str(r.seed),
                    r.variant,
                    str(r.iteration),
                    str(r.cumulative_fe),
                    f"{r.hv:.10g}",
                    "true" if r.f_cdm_flag else "false",
                    f"{r.wall_seconds:.10g}",
                ]
            )
        )
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write history to {path}: {exc}") from exc


def read_history(path: str | Path) -> list[HistoryRecord]:
    """Parse a history file written by :func:`write_history`."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read history from {path}: {exc}") from exc
    if not lines or tuple(lines[0].split(",")) != HISTORY_COLUMNS:
        raise InvalidDataError(f"{path} is not a history file (bad header)")
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(HISTORY_COLUMNS):
            raise InvalidDataError(f"{path}: malformed row {line!r}")
        records.append(
            HistoryRecord(
                problem=parts[0],
                d=int(parts[1]),
                seed=int(parts[2]),
                variant=parts[3],
                iteration=int(parts[4]),
                cumulative_fe=int(parts[5]),
                hv=float(parts[6]),
                f_cdm_flag=parts[7] == "true",
                wall_seconds=float(parts[8]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Experiment execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    problem: str
    d: int
    seed: int
    variant: str
    status: str  # "ok" or "failed"
    final_hv: float | None
    run_dir: str
    error: str | None = None


@dataclass(frozen=True)
class ExperimentSummary:
    cells: tuple[CellResult, ...]
    median_final_hv: dict[str, float]
    output_dir: str

    @property
    def failed(self) -> bool:
        return any(c.status != "ok" for c in self.cells)


def resolve_output_dir(configured: str | None) -> Path:
    if configured:
        return Path(configured)
    env = os.environ.get(OUTPUT_DIR_ENV)
    return Path(env) if env else Path("runs")


def _write_front(result: RunResult, d: int, path: Path) -> None:
    X = result.archive.X
    Y = result.archive.Y
    idx = nondominated_filter(Y)
    header = [f"x{j + 1}" for j in range(d)] + [f"f{j + 1}" for j in range(Y.shape[1])]
    lines = [",".join(header)]
    for i in idx:
        row = list(X[i]) + list(Y[i])
        lines.append(",".join(f"{v:.10g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def run_cell(
    problem: str,
    d: int,
    seed: int,
    variant: str,
    base_run: RunConfig,
    out_dir: Path,
    record_timing: bool = False,
    snapshot_text: str | None = None,
) -> CellResult:
    """Execute one (problem, seed, variant) cell and persist its three files:
    the resolved config snapshot, the history, and the final front."""
    run_dir = out_dir / f"{problem}_{d}" / variant / str(seed)
    try:
        spec = make_problem(problem, d)
        cfg = apply_variant(replace(base_run, seed=seed), variant)
        result = run(spec, cfg)

        run_dir.mkdir(parents=True, exist_ok=True)
        if snapshot_text is None:
            snapshot_text = render_config(
                ExperimentConfig(
                    problems=((problem, d),),
                    seeds=(seed,),
                    variant=variant,
                    output_dir=str(out_dir),
                    workers=1,
                    record_timing=record_timing,
                    run=base_run,
                )
            )
        (run_dir / "config.txt").write_text(snapshot_text)
        walls = result.iteration_seconds if record_timing else None
        write_history(
            history_from_result(result, problem, d, seed, variant, walls),
            run_dir / "history.csv",
        )
        _write_front(result, d, run_dir / "front.csv")
        return CellResult(
            problem=problem,
            d=d,
            seed=seed,
            variant=variant,
            status="ok",
            final_hv=result.hv_curve[-1][1],
            run_dir=str(run_dir),
        )
    except Exception as exc:  # cell failures must not abort sibling cells
        return CellResult(
            problem=problem,
            d=d,
            seed=seed,
            variant=variant,
            status="failed",
            final_hv=None,
            run_dir=str(run_dir),
            error=f"{type(exc).__name__}: {exc}",
        )


def execute_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """Run every (problem x seed) cell of the experiment, possibly in a pool.

    Every run directory receives the same resolved experiment snapshot; the
    cell's identity is carried by its directory path.
    """
    out_dir = resolve_output_dir(cfg.output_dir)
    snapshot_text = render_config(replace(cfg, output_dir=str(out_dir)))
    cells = [(name, d, seed) for name, d in cfg.problems for seed in cfg.seeds]

    def job(cell):
        name, d, seed = cell
        return run_cell(
            name, d, seed, cfg.variant, cfg.run, out_dir, cfg.record_timing, snapshot_text
        )

    if cfg.workers == 1:
        results = [job(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(job, cells))

    medians: dict[str, float] = {}
    for name, d in cfg.problems:
        values = [
            c.final_hv
            for c in results
            if c.problem == name and c.d == d and c.final_hv is not None
        ]
        if values:
            medians[f"{name}_{d}"] = float(statistics.median(values))
    return ExperimentSummary(
        cells=tuple(results), median_final_hv=medians, output_dir=str(out_dir)
    )


# ---------------------------------------------------------------------------
# Plotting
# ---------------------------------------------------------------------------


def medians_path_for(out_path: str | Path) -> Path:
    out_path = Path(out_path)
    return out_path.with_name(out_path.stem + "_medians.csv")


def emit_plot(history_paths: list[str | Path], out_path: str | Path) -> Path:
    """Aggregate history files into a median hypervolume chart (SVG) with
    min-max shading, plus a companion medians file. Returns the medians path.

    The x axis counts evaluations after initialization and starts at 0; every
    run must share the same evaluation grid.
    """
    if not history_paths:
        raise InvalidDataError("emit_plot needs at least one history file")
    runs = []
    for p in history_paths:
        records = read_history(p)
        if not records:
            raise InvalidDataError(f"{p}: empty history")
        fes = [r.cumulative_fe - records[0].cumulative_fe for r in records]
        runs.append((Path(p), records[0].variant, fes, [r.hv for r in records]))

    grid = runs[0][2]
    for path, _, fes, _ in runs:
        if fes != grid:
            raise HistoryAlignmentError(
                f"{path}: evaluation grid {fes[:3]}... does not match {grid[:3]}..."
            )

    by_variant: dict[str, list[list[float]]] = {}
    for _, variant, _, hvs in runs:
        by_variant.setdefault(variant, []).append(hvs)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    medians_lines = ["variant,fe_after_init,median_hv,min_hv,max_hv"]
    for variant in sorted(by_variant):
        series = np.array(by_variant[variant])
        med = np.median(series, axis=0)
        lo = series.min(axis=0)
        hi = series.max(axis=0)
        ax.plot(grid, med, label=variant)
        ax.fill_between(grid, lo, hi, alpha=0.2)
        for x, m, a, b in zip(grid, med, lo, hi):
            medians_lines.append(f"{variant},{x},{m:.10g},{a:.10g},{b:.10g}")
    ax.set_xlabel("function evaluations after initialization")
    ax.set_ylabel("hypervolume")
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format=out_path.suffix.lstrip(".") or "svg")
    plt.close(fig)

    medians_path = medians_path_for(out_path)
    medians_path.write_text("\n".join(medians_lines) + "\n")
    return medians_path
