"""CSV datasets and the versioned text format for fits and force tables."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import NamedTuple, TextIO, Union

from .calibration import ForceTable, IntensityFit
from .constants import CSV_SCHEMA_VERSION, TEXT_FORMAT_VERSION
from .core.locking import write_locked
from .exceptions import SerializationError

PathLike = Union[str, Path]

SWEEP_COLUMNS = (
    "config_kind",
    "d_mm",
    "rho",
    "delta_mm",
    "force_N",
    "range_mm",
    "intensity",
    "crosstalk",
)
OPTIM_COLUMNS = ("radius_mm", "thickness_mm", "crosstalk", "sensitivity", "objective")
ANALYTIC_COLUMNS = ("s_mm", "r_mm", "formula_mm2", "exact_mm2", "monte_carlo_mm2")

FIT_KIND = "intensity-fit"
FORCE_TABLE_KIND = "force-table"


class SweepRow(NamedTuple):
    config_kind: str
    d_mm: float
    rho: float
    delta_mm: float
    force_n: float
    range_mm: float
    intensity: float
    crosstalk: float


def format_value(value) -> str:
    """Render one CSV cell; floats use 9 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9g}"
    return str(value)


def _schema_line(name: str) -> str:
    return f"# pcf-sensor-sim {name} v{CSV_SCHEMA_VERSION}"


def write_csv(
    stream: TextIO, name: str, columns: Sequence[str], rows: Iterable[Sequence]
) -> int:
    """Write a schema comment, a header and ``rows``; returns the row count."""
    stream.write(_schema_line(name) + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    count = 0
    for row in rows:
        if len(row) != len(columns):
            raise SerializationError(f"row has {len(row)} cells, expected {len(columns)}")
        writer.writerow([format_value(v) for v in row])
        count += 1
    return count


def sweep_csv_text(rows: Iterable[SweepRow]) -> str:
    buffer = io.StringIO()
    write_csv(buffer, "sweep", SWEEP_COLUMNS, rows)
    return buffer.getvalue()


def optim_csv_text(rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    write_csv(buffer, "optimize", OPTIM_COLUMNS, rows)
    return buffer.getvalue()


def analytic_csv_text(rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    write_csv(buffer, "analytic-check", ANALYTIC_COLUMNS, rows)
    return buffer.getvalue()


def read_sweep_csv(path: PathLike) -> list[SweepRow]:
    """Parse a sweep CSV written by ``sweep_csv_text``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != _schema_line("sweep"):
        raise SerializationError(f"{path}: missing or unsupported sweep schema line")
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if tuple(header or ()) != SWEEP_COLUMNS:
        raise SerializationError(f"{path}: unexpected columns {header}")
    rows = []
    for cells in reader:
        try:
            rows.append(SweepRow(cells[0], *(float(c) for c in cells[1:])))
        except (TypeError, ValueError) as e:
            raise SerializationError(f"{path}: bad row {cells}: {e}") from e
    return rows


def _header(kind: str) -> str:
    return f"# pcf-sensor-sim {kind} v{TEXT_FORMAT_VERSION}"


def _parse(text: str, kind: str) -> tuple[dict[str, str], list[list[str]]]:
    lines = [line.strip() for line in text.splitlines()]
    if not lines or lines[0] != _header(kind):
        found = lines[0] if lines else "<empty>"
        raise SerializationError(f"expected header '{_header(kind)}', found '{found}'")
    values: dict[str, str] = {}
    rows: list[list[str]] = []
    for line in lines[1:]:
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        else:
            rows.append(line.split())
    return values, rows


def _require(values: dict[str, str], key: str, kind: str) -> str:
    try:
        return values[key]
    except KeyError:
        raise SerializationError(f"{kind}: missing key '{key}'") from None


def dump_fit(fit: IntensityFit) -> str:
    lines = [
        _header(FIT_KIND),
        f"kappa = {fit.kappa!r}",
        f"zeta = {fit.zeta!r}",
        f"chi = {fit.chi!r}",
        f"rms = {fit.rms!r}",
        f"iterations = {fit.iterations}",
        f"converged = {format_value(fit.converged)}",
        f"gradient_norm = {fit.gradient_norm!r}",
    ]
    return "\n".join(lines) + "\n"


def parse_fit(text: str) -> IntensityFit:
    values, _ = _parse(text, FIT_KIND)
    try:
        return IntensityFit(
            kappa=float(_require(values, "kappa", FIT_KIND)),
            zeta=float(_require(values, "zeta", FIT_KIND)),
            chi=float(_require(values, "chi", FIT_KIND)),
            rms=float(values.get("rms", "nan")),
            iterations=int(values.get("iterations", "0")),
            converged=values.get("converged", "false") == "true",
            gradient_norm=float(values.get("gradient_norm", "nan")),
        )
    except ValueError as e:
        raise SerializationError(f"{FIT_KIND}: {e}") from e


def dump_force_table(table: ForceTable) -> str:
    lines = [
        _header(FORCE_TABLE_KIND),
        f"reflectivity = {table.reflectivity!r}",
        f"knots = {len(table.forces)}",
        "# intensity force_N",
    ]
    lines += [f"{i!r} {f!r}" for i, f in zip(table.intensities, table.forces)]
    return "\n".join(lines) + "\n"


def parse_force_table(text: str) -> ForceTable:
    values, rows = _parse(text, FORCE_TABLE_KIND)
    try:
        expected = int(_require(values, "knots", FORCE_TABLE_KIND))
        reflectivity = float(_require(values, "reflectivity", FORCE_TABLE_KIND))
        knots = [(float(r[0]), float(r[1])) for r in rows]
    except (ValueError, IndexError) as e:
        raise SerializationError(f"{FORCE_TABLE_KIND}: {e}") from e
    if len(knots) != expected:
        raise SerializationError(
            f"{FORCE_TABLE_KIND}: header promises {expected} knots, found {len(knots)}"
        )
    return ForceTable(
        reflectivity=reflectivity,
        forces=tuple(f for _, f in knots),
        intensities=tuple(i for i, _ in knots),
    )


def save_fit(fit: IntensityFit, path: PathLike) -> Path:
    """Write ``fit`` under the output lock; returns the path written."""
    return write_locked(path, dump_fit(fit))


def load_fit(path: PathLike) -> IntensityFit:
    return parse_fit(Path(path).read_text(encoding="utf-8"))


def save_force_table(table: ForceTable, path: PathLike) -> Path:
    """Write ``table`` under the output lock; returns the path written."""
    return write_locked(path, dump_force_table(table))


def load_force_table(path: PathLike) -> ForceTable:
    return parse_force_table(Path(path).read_text(encoding="utf-8"))
