"""Command-line front end: simulations, convergence studies, stability checks.

Commands
--------
evolve               run one simulation, writing solution snapshots
study-epsilon        regularization-convergence study
study-discretization space/time discretization-convergence study
study-total          total-error study against the exact traveling wave
stability-check      report the step-size bound for a configuration

Exit codes: 0 success, 2 configuration error, 3 stability refusal (rerun
with --force to override), 4 numerical overflow.

Study tables are emitted as CSV (header
``level,h,tau,epsilon,err_l2,err_linf,err_h1,rate_l2,rate_linf,rate_h1``)
or as JSON wrapping the same rows with the resolved configuration, the
wall time, and the post-hoc stability verdicts.  All diagnostics go to
stderr; data goes only to files or stdout.  Output files are written
atomically (temp file + rename), so an interrupted run never leaves a
truncated file behind.

Study levels run concurrently; bound the worker count with the
``LOGKG_THREADS`` environment variable (default: available parallelism).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

from .analysis import (
    DEFAULT_REFERENCE,
    FINE_REFERENCE,
    StudyKind,
    discretization_convergence_study,
    epsilon_convergence_study,
    total_convergence_study,
)
from .core import Grid1D, TimeMesh, norm_linf
from .problems import PROBLEM_NAMES, get_problem, sample_initial_data
from .schemes import (
    Scheme,
    SchemeParams,
    SnapshotRecorder,
    StabilityViolation,
    StabilityWarning,
    StepOverflowError,
    run_simulation,
    sigma_max,
    stability_limit,
)

CSV_HEADER = "level,h,tau,epsilon,err_l2,err_linf,err_h1,rate_l2,rate_linf,rate_h1"

_DOMAIN = (-16.0, 16.0)
_EVOLVE_SPACING = 2.0**-7
_EVOLVE_TAU = 0.01 * 2.0**-7
_TOTAL_EPS_LADDER = "1e-3,2.5e-4,6.25e-5,1.5625e-5,3.90625e-6"
_EPS_STUDY_LADDER = "1e-2,2.5e-3,6.25e-4,1.5625e-4"

COMMANDS = ("evolve", "study-epsilon", "study-discretization", "study-total", "stability-check")


@dataclass
class RunConfig:
    """Fully resolved invocation; every numeric field is validated before any
    computation starts."""

    command: str
    problem: str
    scheme: str
    epsilon: float
    lam: float
    domain: tuple[float, float]
    n_points: int
    tau: float
    final_time: float
    levels: int
    output_path: str | None
    output_format: str
    force: bool
    snapshot_times: tuple[float, ...]
    eps_list: tuple[float, ...]
    mode: str
    start_h: float
    start_tau: float
    fine_reference: bool


def _fail(message) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(2)


def _parse_floats(text, flag):
    try:
        values = tuple(float(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise _fail(f"{flag} expects a comma-separated list of numbers")
    if not values:
        raise _fail(f"{flag} must not be empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logkg",
        description="Finite-difference solver and convergence laboratory for the "
        "regularized logarithmic Klein-Gordon equation on periodic 1D domains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, with_levels=False):
        p.add_argument("--config", help="JSON file with defaults; flags override it")
        p.add_argument("--problem", choices=PROBLEM_NAMES)
        p.add_argument("--scheme", choices=[s.value for s in Scheme])
        p.add_argument("--epsilon", type=float, help="regularization parameter (> 0)")
        p.add_argument("--lambda", dest="lam", type=float, help="nonlinearity strength")
        p.add_argument("--domain", nargs=2, type=float, metavar=("A", "B"))
        p.add_argument("--n-points", dest="n_points", type=int)
        p.add_argument("--tau", type=float, help="time step (> 0)")
        p.add_argument("--T", "--final-time", dest="final_time", type=float)
        if with_levels:
            p.add_argument("--levels", type=int)
        p.add_argument("--output", "-o", dest="output_path")
        p.add_argument("--format", dest="output_format", choices=("csv", "json"))
        p.add_argument("--force", action="store_true", default=None,
                       help="override a stability refusal")

    p = sub.add_parser("evolve", help="run one simulation and write snapshots")
    common(p)
    p.add_argument("--snapshot-times", help="comma-separated times (default: final time)")

    p = sub.add_parser("study-epsilon", help="regularization-convergence study")
    common(p)
    p.add_argument("--eps-list", help=f"comma-separated ladder (default {_EPS_STUDY_LADDER})")
    p.add_argument("--fine-reference", action="store_true", default=None,
                   help="use the high-accuracy reference resolution")

    p = sub.add_parser("study-discretization", help="discretization-convergence study")
    common(p, with_levels=True)
    p.add_argument("--mode", choices=("temporal-spatial", "spatial-only"))
    p.add_argument("--fine-reference", action="store_true", default=None)

    p = sub.add_parser("study-total", help="total-error study against the exact wave")
    common(p, with_levels=True)
    p.add_argument("--eps-list", help=f"comma-separated ladder (default {_TOTAL_EPS_LADDER})")
    p.add_argument("--start-h", dest="start_h", type=float)
    p.add_argument("--start-tau", dest="start_tau", type=float)

    p = sub.add_parser("stability-check", help="report the step-size bound")
    common(p)
    return parser


_DEFAULTS = {
    "problem": "example1",
    "scheme": "efd",
    "epsilon": 1e-3,
    "lam": 1.0,
    "domain": _DOMAIN,
    "n_points": None,  # derived from the default spacing once the domain is known
    "tau": _EVOLVE_TAU,
    "final_time": 1.0,
    "levels": None,
    "output_path": None,
    "output_format": "csv",
    "force": False,
    "snapshot_times": None,
    "eps_list": None,
    "mode": "temporal-spatial",
    "start_h": 0.1,
    "start_tau": 0.1,
    "fine_reference": False,
}


def parse_config(argv=None) -> RunConfig:
    """Parse flags and optional config file into a validated RunConfig.

    Precedence: flags override config-file entries override defaults.
    Unknown config-file keys are rejected.
    """
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")

    merged = dict(_DEFAULTS)
    if command == "study-epsilon":
        merged["final_time"] = 0.5  # errors are conventionally reported at T = 0.5
    if command == "study-total":
        merged["levels"] = 6
        merged["eps_list"] = _TOTAL_EPS_LADDER
    config_path = args.pop("config", None)
    if config_path:
        try:
            with open(config_path) as fh:
                file_entries = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _fail(f"--config: cannot read {config_path}: {exc}")
        if not isinstance(file_entries, dict):
            raise _fail("--config file must contain a JSON object")
        for key, value in file_entries.items():
            k = key.replace("-", "_")
            if k == "lambda":
                k = "lam"
            if k not in _DEFAULTS:
                raise _fail(f"--config: unknown key {key!r}")
            merged[k] = value
    for key, value in args.items():
        if value is not None:
            merged[key] = value

    # fill remaining command-dependent defaults
    if merged["levels"] is None:
        merged["levels"] = 5
    if merged["eps_list"] is None:
        merged["eps_list"] = _EPS_STUDY_LADDER

    if isinstance(merged["eps_list"], str):
        merged["eps_list"] = _parse_floats(merged["eps_list"], "--eps-list")
    else:
        merged["eps_list"] = tuple(float(e) for e in merged["eps_list"])
    if isinstance(merged["snapshot_times"], str):
        merged["snapshot_times"] = _parse_floats(merged["snapshot_times"], "--snapshot-times")

    # validation (named after the offending flag)
    try:
        domain = (float(merged["domain"][0]), float(merged["domain"][1]))
    except (TypeError, ValueError, IndexError):
        raise _fail("--domain expects two numbers")
    if not domain[1] > domain[0]:
        raise _fail("--domain: b must exceed a")
    if merged["n_points"] is None:
        merged["n_points"] = round((domain[1] - domain[0]) / _EVOLVE_SPACING)
    if merged["tau"] is None or merged["tau"] <= 0:
        raise _fail("tau must be positive")
    if merged["final_time"] is None or merged["final_time"] <= 0:
        raise _fail("--T must be positive")
    if merged["epsilon"] is None or merged["epsilon"] <= 0:
        raise _fail("--epsilon must be positive")
    if int(merged["n_points"]) < 4:
        raise _fail("--n-points must be at least 4")
    if int(merged["levels"]) < 1:
        raise _fail("--levels must be at least 1")
    if merged["snapshot_times"] is None:
        merged["snapshot_times"] = (float(merged["final_time"]),)
    if command == "study-total" and merged["problem"] != "example1":
        raise _fail("--problem: the total study requires the analytic solution (example1 only)")
    if command == "evolve":
        bad = [t for t in merged["snapshot_times"] if t < 0 or t > merged["final_time"] + 1e-12]
        if bad:
            raise _fail(f"--snapshot-times: {bad[0]!r} outside [0, T]")

    return RunConfig(
        command=command,
        problem=str(merged["problem"]),
        scheme=str(merged["scheme"]),
        epsilon=float(merged["epsilon"]),
        lam=float(merged["lam"]),
        domain=domain,
        n_points=int(merged["n_points"]),
        tau=float(merged["tau"]),
        final_time=float(merged["final_time"]),
        levels=int(merged["levels"]),
        output_path=merged["output_path"],
        output_format=str(merged["output_format"]),
        force=bool(merged["force"]),
        snapshot_times=tuple(float(t) for t in merged["snapshot_times"]),
        eps_list=tuple(merged["eps_list"]),
        mode=str(merged["mode"]),
        start_h=float(merged["start_h"]),
        start_tau=float(merged["start_tau"]),
        fine_reference=bool(merged["fine_reference"]),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def tables_to_csv(tables) -> str:
    lines = [CSV_HEADER]
    for table in tables:
        for r in table.rows:
            lines.append(
                f"{r.level},{_fmt(r.h)},{_fmt(r.tau)},{_fmt(r.epsilon)},"
                f"{_fmt(r.l2)},{_fmt(r.linf)},{_fmt(r.h1)},"
                f"{_fmt(r.rate_l2)},{_fmt(r.rate_linf)},{_fmt(r.rate_h1)}"
            )
    return "\n".join(lines) + "\n"


def _table_json(table):
    return {
        "study_kind": table.study_kind.value,
        "post_stable": None if table.post_stable is None else list(table.post_stable),
        "rows": [dataclasses.asdict(r) for r in table.rows],
    }


def study_document(config, tables, wall_time) -> dict:
    cfg = dataclasses.asdict(config)
    cfg["domain"] = list(config.domain)
    cfg["snapshot_times"] = list(config.snapshot_times)
    cfg["eps_list"] = list(config.eps_list)
    return {
        "command": config.command,
        "scheme": config.scheme,
        "config": cfg,
        "wall_time_seconds": wall_time,
        "tables": [_table_json(t) for t in tables],
    }


def atomic_write(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(config, text):
    if config.output_path:
        path = config.output_path
        if config.output_format == "json" and not str(path).endswith(".json"):
            path = f"{path}.json"
        atomic_write(path, text)
        print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _snapshot_name(prefix, t) -> str:
    return f"{prefix}_t{t:g}.csv"


def _run_evolve(config) -> int:
    spec = get_problem(config.problem)
    grid = Grid1D(config.domain[0], config.domain[1], config.n_points)
    mesh = TimeMesh.from_final_time(config.tau, config.final_time)
    params = SchemeParams(epsilon=config.epsilon, lam=config.lam, scheme=config.scheme)
    phi, gamma = sample_initial_data(spec, grid)
    if spec.wave_params is not None:
        c, k = spec.wave_params
        if config.final_time * c / k > 0.75 * (config.domain[1] - config.domain[0]) / 2:
            print(
                "note: the wave approaches the domain boundary before T; "
                "the periodic truncation is no longer faithful",
                file=sys.stderr,
            )
    recorder = SnapshotRecorder(config.snapshot_times, config.tau)
    started = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("always", StabilityWarning)
        result = run_simulation(
            phi, gamma, grid, mesh, params, observers=(recorder,), force=config.force
        )
    wall = time.perf_counter() - started

    verdict = "satisfied" if result.post_ok else "violated (advisory)"
    print(
        f"post-hoc stability: {verdict}; realized amplitude "
        f"{result.state.amplitude_max:.6g}",
        file=sys.stderr,
    )
    prefix = config.output_path or f"{config.problem}_{config.scheme}"
    if config.output_format == "json":
        doc = study_document(config, [], wall)
        doc["snapshots"] = {
            repr(float(t)): [float(v) for v in recorder.at(t)]
            for t in config.snapshot_times
        }
        doc["x"] = [float(v) for v in grid.x]
        doc["post_stable"] = result.post_ok
        doc.pop("tables")
        path = prefix if str(prefix).endswith(".json") else f"{prefix}.json"
        atomic_write(path, json.dumps(doc, indent=2) + "\n")
        print(f"wrote {path}", file=sys.stderr)
    else:
        x = grid.x
        for t in config.snapshot_times:
            u = recorder.at(t)
            lines = ["x,u"]
            lines.extend(f"{_fmt(xv)},{_fmt(uv)}" for xv, uv in zip(x, u))
            path = _snapshot_name(prefix, t)
            atomic_write(path, "\n".join(lines) + "\n")
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _run_study(config) -> int:
    spec = get_problem(config.problem)
    resolution = FINE_REFERENCE if config.fine_reference else DEFAULT_REFERENCE
    started = time.perf_counter()
    if config.command == "study-epsilon":
        tables = [
            epsilon_convergence_study(
                spec, config.scheme, config.eps_list, config.final_time,
                lam=config.lam, resolution=resolution,
            )
        ]
    elif config.command == "study-discretization":
        tables = [
            discretization_convergence_study(
                spec, config.scheme, config.epsilon, config.levels,
                StudyKind(config.mode), config.final_time,
                lam=config.lam, resolution=resolution,
            )
        ]
    else:  # study-total
        tables = total_convergence_study(
            spec, config.scheme, config.eps_list, config.start_h,
            config.start_tau, config.levels, config.final_time, lam=config.lam,
        )
    wall = time.perf_counter() - started
    if config.output_format == "json":
        text = json.dumps(study_document(config, tables, wall), indent=2) + "\n"
    else:
        text = tables_to_csv(tables)
    _emit(config, text)
    return 0


def _run_stability_check(config) -> int:
    spec = get_problem(config.problem)
    grid = Grid1D(config.domain[0], config.domain[1], config.n_points)
    params = SchemeParams(epsilon=config.epsilon, lam=config.lam, scheme=config.scheme)
    phi, _ = sample_initial_data(spec, grid)
    sigma = sigma_max(config.epsilon, 1.2 * norm_linf(phi))
    report = stability_limit(params, grid, sigma, config.tau)
    lines = [
        f"scheme={config.scheme}",
        f"sigma_max={report.sigma_max!r}",
        f"tau={config.tau!r}",
        f"tau_limit={'unbounded' if report.tau_limit is None else repr(report.tau_limit)}",
        f"satisfied={str(bool(report.satisfied)).lower()}",
        f"margin={'' if report.margin is None else repr(report.margin)}",
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def execute(config) -> int:
    """Dispatch a validated RunConfig; returns the process exit code."""
    try:
        if config.command == "evolve":
            return _run_evolve(config)
        if config.command == "stability-check":
            return _run_stability_check(config)
        return _run_study(config)
    except StabilityViolation as exc:
        print(
            f"stability refusal: {exc} -- rerun with --force to override",
            file=sys.stderr,
        )
        return 3
    except StepOverflowError as exc:
        print(f"numerical overflow: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    return execute(config)


if __name__ == "__main__":
    raise SystemExit(main())
