"""Elastomer ToF sensor simulator CLI.

Every subcommand except ``show-config`` and ``status`` appends a started and
a finished entry to the JSONL run log.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections.abc import Callable
from datetime import datetime
from pathlib import Path
from typing import Any

from pcf_sensor_sim.calibration import build_force_table, fit_intensity
from pcf_sensor_sim.cli.common import (
    add_config_argument,
    add_output_argument,
    add_quiet_argument,
    add_scene_arguments,
    add_workers_argument,
    error_kind,
    fail,
    log,
    validate_path_exists,
)
from pcf_sensor_sim.core import (
    RUN_LOG_PREFIX,
    get_log_dir,
    get_output_dir,
    get_workers,
    new_run_id,
    summarize_runs,
    write_locked,
    write_log_entry,
)
from pcf_sensor_sim.exceptions import PcfError
from pcf_sensor_sim.experiments import (
    SWEEP_AXES,
    ExperimentConfig,
    analytic_check_csv,
    build_scene,
    fit_samples,
    run_analytic_check,
    run_full_pipeline,
    run_optimize,
    run_proximity_sweep,
    sweep_csv,
    worker_pool,
)
from pcf_sensor_sim.models import BoundaryKind
from pcf_sensor_sim.render import render_ray_diagram
from pcf_sensor_sim.sensor import simulate, snr
from pcf_sensor_sim.serialization import (
    dump_fit,
    dump_force_table,
    load_fit,
    load_force_table,
    optim_csv_text,
    read_sweep_csv,
    save_fit,
    save_force_table,
)

Handler = Callable[[argparse.Namespace, ExperimentConfig], list[str]]


def load_config(path: Path | None) -> ExperimentConfig:
    """Load the experiment config, or the all-defaults config when ``path`` is None."""
    if path is None:
        return ExperimentConfig()
    validate_path_exists(path, "Config file")
    return ExperimentConfig.from_file(path)


def _save(
    text: str, save: Callable[[Path], Path], output: str | None, default: Path, quiet: bool
) -> list[str]:
    """Print ``text`` for ``-``, otherwise write it through ``save``."""
    if output == "-":
        sys.stdout.write(text)
        return []
    path = save(Path(output) if output else default)
    log(f"Wrote {path}", quiet)
    return [str(path)]


def emit(text: str, output: str | None, default: Path, quiet: bool) -> list[str]:
    """Write ``text`` to ``output`` (or ``default``) under its lock; ``-`` prints it."""
    return _save(text, lambda path: write_locked(path, text), output, default, quiet)


def _default_output(config: ExperimentConfig, name: str) -> Path:
    return config.output_path(name, get_output_dir())


def _quiet(args: argparse.Namespace) -> bool:
    # stdout carries the data when writing to '-'
    return args.quiet or getattr(args, "output", None) == "-"


def _safe_log_entry(entry: dict[str, Any], log_dir: Path) -> None:
    try:
        write_log_entry(entry, log_dir, prefix=RUN_LOG_PREFIX)
    except OSError as e:
        print(f"warning: run log not written: {e}", file=sys.stderr)


def run_logged(args: argparse.Namespace, config: ExperimentConfig, handler: Handler) -> None:
    """Run ``handler`` between started/finished run-log entries.

    Domain and I/O errors are logged as a failed run, then reported as the
    one-line CLI error.
    """
    log_dir = get_log_dir(getattr(args, "log_dir", None))
    run_id = new_run_id()
    started = time.monotonic()
    _safe_log_entry(
        {
            "event": "started",
            "status": "in_progress",
            "run_id": run_id,
            "command": args.command,
            "config_digest": config.digest(),
            "timestamp": datetime.now().isoformat(),
        },
        log_dir,
    )
    entry: dict[str, Any] = {
        "event": "finished",
        "run_id": run_id,
        "command": args.command,
        "config_digest": config.digest(),
    }
    try:
        outputs = handler(args, config)
    except (PcfError, OSError, ValueError) as e:
        entry.update(status="failed", error=f"{error_kind(e)}: {e}", outputs=[])
        entry.update(
            elapsed_seconds=round(time.monotonic() - started, 3),
            timestamp=datetime.now().isoformat(),
        )
        _safe_log_entry(entry, log_dir)
        fail(error_kind(e), str(e))
    entry.update(
        status="success",
        error=None,
        outputs=outputs,
        elapsed_seconds=round(time.monotonic() - started, 3),
        timestamp=datetime.now().isoformat(),
    )
    _safe_log_entry(entry, log_dir)


def cmd_simulate(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    scene = build_scene(config, args.kind, args.distance, args.reflectivity, args.depth)
    reading = simulate(scene)
    summary = {
        "kind": args.kind,
        "distance_mm": scene.target.distance if scene.target else None,
        "reflectivity": args.reflectivity if scene.target else None,
        "depth_mm": args.depth,
        "range_mm": reading.range_mm,
        "intensity": reading.intensity,
        "crosstalk": reading.crosstalk,
        "snr": snr(reading) if reading.has_signal else None,
        "records": len(reading.records),
    }
    if args.json:
        # inf is not valid JSON
        if summary["snr"] is not None and summary["snr"] == float("inf"):
            summary["snr"] = "inf"
        print(json.dumps(summary, indent=2, sort_keys=True))
        return []
    if not reading.has_signal:
        print("Range:      no signal")
    else:
        print(f"Range:      {reading.range_mm:.4f} mm")
    print(f"Intensity:  {reading.intensity:.6g}")
    print(f"Crosstalk:  {reading.crosstalk:.6g}")
    if summary["snr"] is not None:
        print(f"SNR:        {summary['snr']:.6g}")
    print(f"Records:    {len(reading.records)}")
    return []


def _sweep_command(axis: str | None) -> Handler:
    def handler(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
        chosen = axis or getattr(args, "axis", None) or config.axis
        with worker_pool(get_workers(args.workers)) as mapper:
            log(f"Sweeping {chosen}...", _quiet(args))
            text = sweep_csv(config, chosen, mapper)
        default = _default_output(config, _sweep_file_name(config, chosen))
        return emit(text, args.output, default, _quiet(args))

    return handler


def _sweep_file_name(config: ExperimentConfig, axis: str) -> str:
    return {
        "distance": config.proximity_csv,
        "depth": config.force_csv,
        "radius": config.radius_csv,
    }[axis]


def cmd_trace_diagram(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    scene = build_scene(config, args.kind, args.distance, args.reflectivity, args.depth)
    text = render_ray_diagram(scene)
    return emit(text, args.output, _default_output(config, config.diagram_svg), _quiet(args))


def cmd_fit(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    if args.input is not None:
        rows = read_sweep_csv(args.input)
    else:
        with worker_pool(get_workers(args.workers)) as mapper:
            rows = run_proximity_sweep(config, mapper, kinds=[BoundaryKind(args.kind)])
    samples = fit_samples(rows, args.kind, args.reflectivity, by_range=args.by_range)
    log(f"Fitting {len(samples)} samples ({args.kind}, rho={args.reflectivity})", _quiet(args))
    fit = fit_intensity(samples)
    log(
        f"kappa={fit.kappa:.6g} zeta={fit.zeta:.6g} chi={fit.chi:.6g} "
        f"rms={fit.rms:.3g} converged={fit.converged}",
        _quiet(args),
    )
    return _save(
        dump_fit(fit),
        lambda path: save_fit(fit, path),
        args.output,
        _default_output(config, config.fit_file),
        _quiet(args),
    )


def cmd_force_table(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    template = config.template(args.kind)
    log(
        f"Tabulating {len(config.depths())} depths ({args.kind}, rho={args.reflectivity})",
        _quiet(args),
    )
    table = build_force_table(template, args.reflectivity, config.depths(), config.spring())
    log(f"{len(table.forces)} monotone knots, up to {table.forces[-1]:g} N", _quiet(args))
    return _save(
        dump_force_table(table),
        lambda path: save_force_table(table, path),
        args.output,
        _default_output(config, config.force_table_file),
        _quiet(args),
    )


def cmd_optimize(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    with worker_pool(get_workers(args.workers)) as mapper:
        result = run_optimize(config, mapper, progress=lambda msg: log(msg, _quiet(args)))
    log(
        f"Best radius {result.radius:.4f} mm at thickness {result.thickness:.4f} mm "
        f"(objective {result.objective:.6g}, {result.evaluations} evaluations)",
        _quiet(args),
    )
    return emit(
        optim_csv_text(result.trace),
        args.output,
        _default_output(config, config.optimize_csv),
        _quiet(args),
    )


def fit_member(text: str) -> tuple[float, Path]:
    """Parse a ``RHO=FILE`` fit family member."""
    rho, sep, path = text.partition("=")
    try:
        value = float(rho)
    except ValueError:
        value = float("nan")
    if not sep or not path or not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected RHO=FILE with RHO in [0, 1], got {text!r}")
    return value, Path(path)


def cmd_pipeline(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    fits = None
    if args.fit:
        fits = {rho: load_fit(path) for rho, path in args.fit}
        log(f"Loaded {len(fits)} fits", _quiet(args))
    table = load_force_table(args.force_table) if args.force_table else None
    with worker_pool(get_workers(args.workers)) as mapper:
        report = run_full_pipeline(
            config,
            mapper,
            progress=lambda msg: log(f"  {msg}", _quiet(args)),
            fits=fits,
            force_table=table,
        )
    for stage in report.stages:
        log(f"  [{stage.status}] {stage.name}", _quiet(args))
    for check in report.force_checks:
        log(
            f"  {check.true_force:g} N -> {check.inferred_force:.4f} N "
            f"({check.relative_error:.2%}{', saturated' if check.saturated else ''})",
            _quiet(args),
        )
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    return emit(text, args.output, _default_output(config, config.report_json), _quiet(args))


def cmd_analytic_check(args: argparse.Namespace, config: ExperimentConfig) -> list[str]:
    rows = run_analytic_check(samples=args.samples, seed=args.seed)
    log(f"{'s':>6} {'r':>6} {'formula':>12} {'exact':>12} {'monte carlo':>12}", _quiet(args))
    for row in rows:
        log(
            f"{row.s_mm:6.2f} {row.r_mm:6.2f} {row.formula_mm2:12.6f} "
            f"{row.exact_mm2:12.6f} {row.monte_carlo_mm2:12.6f}",
            _quiet(args),
        )
    return emit(
        analytic_check_csv(rows),
        args.output,
        _default_output(config, config.analytic_csv),
        _quiet(args),
    )


def print_run_status(log_dir: Path, as_json: bool = False) -> None:
    summary = summarize_runs(log_dir)
    if as_json:
        print(json.dumps(summary, indent=2, sort_keys=True))
        return

    print("RUN LOG")
    print(f"Finished:      {summary['finished']}")
    print(f"Succeeded:     {summary['succeeded']}")
    print(f"Failed:        {summary['failed']}")
    print(f"Unfinished:    {summary['unfinished']}")
    print(f"Elapsed:       {summary['elapsed_seconds']:.1f} s")
    print(f"Corrupt lines: {summary['corrupt_log_lines']}")
    for command, count in summary["by_command"].items():
        print(f"  {command}: {count}")
    for run in summary["unfinished_runs"]:
        print(f"  unfinished: {run['command']} {run['run_id']} ({run['started_at']})")
    for failure in summary["recent_failures"]:
        print(f"  failed: {failure['command']} {failure['run_id']}: {failure['error']}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcf-sim",
        description="Elastomer-covered ToF proximity/contact/force sensor simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--log-dir", type=str, default=None, help="Run log directory (default: PCF_LOG_DIR)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate_parser = subparsers.add_parser("simulate", help="Simulate a single reading")
    add_config_argument(simulate_parser)
    add_scene_arguments(simulate_parser)
    simulate_parser.add_argument("--json", action="store_true", help="Emit JSON output")

    sweep_parser = subparsers.add_parser("sweep", help="Sweep along the configured axis")
    sweep_parser.add_argument("--axis", choices=SWEEP_AXES, default=None)
    for name, help_text in (
        ("sweep-proximity", "Range/intensity vs distance for every configuration"),
        ("sweep-force", "Range/intensity vs indentation depth in contact"),
    ):
        subparsers.add_parser(name, help=help_text)
    for name in ("sweep", "sweep-proximity", "sweep-force"):
        sub = subparsers.choices[name]
        add_config_argument(sub)
        add_output_argument(sub, "sweep CSV")
        add_workers_argument(sub)
        add_quiet_argument(sub)

    diagram_parser = subparsers.add_parser("trace-diagram", help="Render an SVG ray diagram")
    add_config_argument(diagram_parser)
    add_scene_arguments(diagram_parser)
    add_output_argument(diagram_parser, "SVG diagram")
    add_quiet_argument(diagram_parser)

    fit_parser = subparsers.add_parser("fit", help="Fit the intensity law to sweep data")
    add_config_argument(fit_parser)
    fit_parser.add_argument(
        "--input", type=Path, default=None, help="Sweep CSV (default: simulate one)"
    )
    fit_parser.add_argument(
        "--kind",
        choices=[kind.value for kind in BoundaryKind],
        default=BoundaryKind.BARE.value,
        help="Configuration whose rows are fitted (default: bare)",
    )
    fit_parser.add_argument("--reflectivity", type=float, default=0.5)
    fit_parser.add_argument(
        "--by-range",
        action="store_true",
        help="Fit against the range reading instead of the true distance (pipeline curves)",
    )
    add_output_argument(fit_parser, "fit file")
    add_workers_argument(fit_parser)
    add_quiet_argument(fit_parser)

    table_parser = subparsers.add_parser(
        "force-table", help="Tabulate contact intensity against spring force"
    )
    add_config_argument(table_parser)
    table_parser.add_argument(
        "--kind",
        choices=[kind.value for kind in BoundaryKind if kind is not BoundaryKind.BARE],
        default=BoundaryKind.ARC.value,
        help="Configuration pressed into (default: arc)",
    )
    table_parser.add_argument("--reflectivity", type=float, default=0.5)
    add_output_argument(table_parser, "force table")
    add_quiet_argument(table_parser)

    optimize_parser = subparsers.add_parser("optimize", help="Optimize arc radius and thickness")
    add_config_argument(optimize_parser)
    add_output_argument(optimize_parser, "optimization trace CSV")
    add_workers_argument(optimize_parser)
    add_quiet_argument(optimize_parser)

    pipeline_parser = subparsers.add_parser(
        "pipeline", help="Proximity -> reflectivity -> contact -> force round trip"
    )
    add_config_argument(pipeline_parser)
    pipeline_parser.add_argument(
        "--fit",
        type=fit_member,
        action="append",
        default=None,
        metavar="RHO=FILE",
        help="Saved range-indexed fit for one reflectivity; repeat for the family "
        "(default: calibrate in-run)",
    )
    pipeline_parser.add_argument(
        "--force-table",
        type=Path,
        default=None,
        help="Saved force table (default: simulate one for the estimated reflectivity)",
    )
    add_output_argument(pipeline_parser, "JSON report")
    add_workers_argument(pipeline_parser)
    add_quiet_argument(pipeline_parser)

    analytic_parser = subparsers.add_parser(
        "analytic-check", help="Closed-form view area vs exact and Monte Carlo areas"
    )
    add_config_argument(analytic_parser)
    analytic_parser.add_argument("--samples", type=int, default=1_000_000)
    analytic_parser.add_argument("--seed", type=int, default=0)
    add_output_argument(analytic_parser, "comparison CSV")
    add_quiet_argument(analytic_parser)

    show_parser = subparsers.add_parser("show-config", help="Print the resolved configuration")
    add_config_argument(show_parser)

    status_parser = subparsers.add_parser("status", help="Summarize the run log")
    status_parser.add_argument("--json", action="store_true", help="Emit JSON output")

    return parser


HANDLERS: dict[str, Handler] = {
    "simulate": cmd_simulate,
    "sweep": _sweep_command(None),
    "sweep-proximity": _sweep_command("distance"),
    "sweep-force": _sweep_command("depth"),
    "trace-diagram": cmd_trace_diagram,
    "fit": cmd_fit,
    "force-table": cmd_force_table,
    "optimize": cmd_optimize,
    "pipeline": cmd_pipeline,
    "analytic-check": cmd_analytic_check,
}


def main(argv: list[str] | None = None) -> None:
    """CLI entry point."""
    args = build_parser().parse_args(argv)

    if args.command == "status":
        print_run_status(get_log_dir(args.log_dir), args.json)
        return

    try:
        config = load_config(args.config)
    except PcfError as e:
        fail(error_kind(e), str(e))

    if args.command == "show-config":
        sys.stdout.write(config.to_text())
        return

    run_logged(args, config, HANDLERS[args.command])


if __name__ == "__main__":
    main()
