"""Command-line client for the diffmobo service.

The CLI always talks HTTP. With ``--server`` (or ``DIFFMOBO_SERVER``) it
targets a running service; otherwise it mounts the service in-process and
speaks to it over an in-memory transport, so single-machine use needs no
separate server. ``diffmobo serve`` starts a standalone service.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

SERVER_ENV = "DIFFMOBO_SERVER"


class ServiceClient:
    """Minimal HTTP client with an in-process fallback."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=30.0)
        else:
            # in-process transport; the service runs inside this process
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from starlette.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def get(self, path: str):
        return self._raise_for_error(self._client.get(path))

    def post(self, path: str, payload: dict):
        return self._raise_for_error(self._client.post(path, json=payload))

    @staticmethod
    def _raise_for_error(response):
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except Exception:
                detail = response.text
            raise SystemExit(f"error {response.status_code}: {detail}")
        return response.json()

    def wait_for_job(self, job_id: str, interval: float, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while True:
            status = self.get(f"/jobs/{job_id}")
            if status["state"] in ("done", "failed"):
                return status
            if time.monotonic() > deadline:
                raise SystemExit(f"timed out waiting for {job_id}")
            time.sleep(interval)


def _print_summary(status: dict) -> int:
    result = status.get("result")
    if result is None:
        print(f"job {status['job_id']} {status['state']}: {status.get('detail')}")
        return 1
    for cell in result["cells"]:
        mark = "ok " if cell["status"] == "ok" else "FAIL"
        hv = f"{cell['final_hv']:.6g}" if cell["final_hv"] is not None else "-"
        line = f"[{mark}] {cell['problem']} d={cell['d']} seed={cell['seed']} hv={hv} -> {cell['run_dir']}"
        if cell.get("error"):
            line += f"  ({cell['error']})"
        print(line)
    for key, value in result["median_final_hv"].items():
        print(f"median {key}: {value:.6g}")
    if result["failed"]:
        print("some cells failed", file=sys.stderr)
        return 1
    return 0


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run overrides")
    group.add_argument("--n-init", type=int)
    group.add_argument("--iterations", type=int)
    group.add_argument("--batch", type=int)
    group.add_argument("--extraction-fraction", type=float)
    group.add_argument("--switch-window", type=int)
    group.add_argument("--switch-threshold", type=float)
    group.add_argument("--switch-mode", choices=("sliding", "blocked"))
    group.add_argument("--n-conditional", type=int)
    group.add_argument("--n-unconditional", type=int)
    group.add_argument("--max-gradient-norm", type=float)
    group.add_argument("--epochs", type=int)
    group.add_argument("--train-batch", type=int)
    group.add_argument("--lr", type=float)
    group.add_argument("--steps", type=int)
    group.add_argument("--beta-min", type=float)
    group.add_argument("--beta-max", type=float)


_OVERRIDE_KEYS = (
    "n_init",
    "iterations",
    "batch",
    "extraction_fraction",
    "switch_window",
    "switch_threshold",
    "switch_mode",
    "n_conditional",
    "n_unconditional",
    "max_gradient_norm",
    "epochs",
    "train_batch",
    "lr",
    "steps",
    "beta_min",
    "beta_max",
)


def _collect_overrides(args: argparse.Namespace) -> dict:
    return {k: getattr(args, k) for k in _OVERRIDE_KEYS if getattr(args, k, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffmobo",
        description="Diffusion-guided multi-objective Bayesian optimization benchmarks.",
    )
    parser.add_argument(
        "--server",
        default=os.environ.get(SERVER_ENV),
        help=f"service URL (default: ${SERVER_ENV} or in-process)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-problems", help="list registered benchmark problems")

    p_run = sub.add_parser("run", help="run one (problem, seed) cell")
    p_run.add_argument("--problem", required=True)
    p_run.add_argument("--d", type=int, required=True)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--variant", default="full")
    p_run.add_argument("--out", help="output directory (default: server-side setting)")
    p_run.add_argument("--record-timing", action="store_true")
    p_run.add_argument("--timeout", type=float, default=3600.0)
    _add_override_flags(p_run)

    p_bench = sub.add_parser("bench", help="run a full experiment config")
    p_bench.add_argument("--config", required=True, help="path to a config document")
    p_bench.add_argument("--out", help="override the config's output directory")
    p_bench.add_argument("--timeout", type=float, default=24 * 3600.0)

    p_plot = sub.add_parser("plot", help="aggregate history files into a chart")
    p_plot.add_argument("--history", nargs="+", required=True)
    p_plot.add_argument("--out", required=True, help="output SVG path")

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8337)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    client = ServiceClient(args.server)
    poll = 0.2 if args.server is None else 1.0

    if args.command == "list-problems":
        data = client.get("/problems")
        for p in data["problems"]:
            print(f"{p['name']:8s} objectives={p['objectives']} min_dimension={p['min_dimension']}")
        return 0

    if args.command == "run":
        payload = {
            "problem": args.problem,
            "d": args.d,
            "seed": args.seed,
            "variant": args.variant,
            "output_dir": args.out,
            "record_timing": args.record_timing,
            "overrides": _collect_overrides(args),
        }
        created = client.post("/runs", payload)
        print(f"submitted {created['job_id']}")
        status = client.wait_for_job(created["job_id"], poll, args.timeout)
        return _print_summary(status)

    if args.command == "bench":
        try:
            config_text = open(args.config).read()
        except OSError as exc:
            raise SystemExit(f"cannot read config: {exc}")
        payload: dict = {"config_text": config_text}
        if args.out:
            payload["output_dir"] = args.out
        created = client.post("/experiments", payload)
        print(f"submitted {created['job_id']}")
        status = client.wait_for_job(created["job_id"], poll, args.timeout)
        return _print_summary(status)

    if args.command == "plot":
        resp = client.post("/plots", {"history_paths": args.history, "out_path": args.out})
        print(f"wrote {resp['out_path']} and {resp['medians_path']}")
        return 0

    raise SystemExit(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
