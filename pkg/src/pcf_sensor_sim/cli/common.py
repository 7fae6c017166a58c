"""Shared CLI utilities."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path
from typing import NoReturn

from pcf_sensor_sim.models import BoundaryKind


def log(msg: str, quiet: bool = False) -> None:
    """Print message unless in quiet mode."""
    if not quiet:
        print(msg, flush=True)


def error_kind(exc: BaseException) -> str:
    """Machine-readable kind for an exception: ``BoundaryError`` -> ``boundary``.

    Example:
        >>> error_kind(LockAcquisitionError("busy"))
        'lock-acquisition'
    """
    name = type(exc).__name__
    if name.endswith("Error") and name != "Error":
        name = name[: -len("Error")]
    return re.sub(r"(?<!^)(?=[A-Z])", "-", name).lower()


def fail(kind: str, message: str) -> NoReturn:
    """Print the one-line ``error: <kind>: <message>`` report and exit 1."""
    first_line = str(message).strip().splitlines()[0] if str(message).strip() else "unknown"
    print(f"error: {kind}: {first_line}", file=sys.stderr)
    raise SystemExit(1)


def add_quiet_argument(parser: argparse.ArgumentParser) -> None:
    """Add --quiet argument to parser."""
    parser.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Minimal output",
    )


def add_config_argument(parser: argparse.ArgumentParser) -> None:
    """Add --config argument to parser."""
    parser.add_argument(
        "--config",
        "-c",
        type=Path,
        default=None,
        help="Experiment config file (sectioned key = value); defaults apply otherwise",
    )


def add_output_argument(parser: argparse.ArgumentParser, what: str) -> None:
    """Add --output argument to parser; ``-`` writes to stdout."""
    parser.add_argument(
        "--output",
        "-o",
        type=str,
        default=None,
        help=f"Where to write the {what} ('-' for stdout; default from [output])",
    )


def add_workers_argument(parser: argparse.ArgumentParser) -> None:
    """Add --workers argument to parser."""
    parser.add_argument(
        "--workers",
        "-j",
        type=int,
        default=None,
        help="Process-pool size for sweep points (default: PCF_WORKERS or 1)",
    )


def add_scene_arguments(parser: argparse.ArgumentParser) -> None:
    """Add the single-scene selectors shared by simulate and trace-diagram."""
    parser.add_argument(
        "--kind",
        choices=[kind.value for kind in BoundaryKind],
        default=BoundaryKind.ARC.value,
        help="Boundary configuration (default: arc)",
    )
    parser.add_argument(
        "--distance", type=float, default=None, help="Target distance in mm (omit for no target)"
    )
    parser.add_argument(
        "--reflectivity", type=float, default=0.5, help="Target reflectivity in [0, 1]"
    )
    parser.add_argument(
        "--depth", type=float, default=0.0, help="Indentation depth in mm (puts the target in contact)"
    )


def validate_path_exists(path: Path, name: str = "Path") -> None:
    """Validate that a path exists, exit with error if not.

    Raises:
        SystemExit: If path does not exist.
    """
    if not path.exists():
        fail("io", f"{name} does not exist: {path}")
