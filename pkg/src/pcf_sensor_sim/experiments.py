"""Experiment configuration, sweeps and the proximity-to-force pipeline.

Sweeps fan their points out through a ``map``-like callable so they can run
on a process pool; results always come back in grid order.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Any, NamedTuple, Optional

import numpy as np

from .calibration import (
    ForceTable,
    IntensityCurve,
    IntensityFit,
    IntensityProfile,
    build_force_table,
    characterize_reflectivity,
    contact_scene,
    fit_intensity,
    infer_force,
)
from .constants import (
    ARC_THICKNESS_MM,
    BLOCKER_CLEARANCE_MM,
    BLOCKER_THICKNESS_MM,
    BOUNCE_CAP,
    BOUNDARY_SPAN_MM,
    CONTACT_RANGE_DROP_MM,
    DEFAULT_REFLECTIVITIES,
    DEFOCUS_WEIGHT,
    EMITTER_RAYS,
    EMITTER_RECEIVER_SEPARATION_MM,
    FLAT_THICKNESS_MM,
    GOLDEN_SWEEPS,
    GRID_POINTS,
    HALF_FOV_DEG,
    MAX_PROXIMITY_MM,
    PDMS_INDEX,
    POWER_FLOOR,
    RECEIVER_APERTURE_HALF_WIDTH_MM,
    SCATTER_RAYS,
    SPRING_MAX_FORCE_N,
    SPRING_STIFFNESS_N_PER_MM,
)
from .core.config import read_sections
from .elastomer import depth_from_force, force_from_depth
from .exceptions import CalibrationError, ConfigError, PcfError
from .models import BoundaryConfig, BoundaryKind, Scene, SensorHead, SpringModel, Target
from .optics import Medium
from .optimizer import Evaluation, ObjectiveSpec, OptimResult, evaluate_arc, optimize_arc
from .sensor import (
    analytic_view_area,
    area_view_oracle,
    exact_lens_area,
    simulate,
)
from .serialization import SweepRow, analytic_csv_text, optim_csv_text, sweep_csv_text

Mapper = Callable[..., Any]

SWEEP_AXES = ("distance", "depth", "radius")
PROXIMITY_KINDS = (BoundaryKind.BARE, BoundaryKind.FLAT, BoundaryKind.BLOCKER, BoundaryKind.ARC)
FORCE_KINDS = (BoundaryKind.FLAT, BoundaryKind.BLOCKER, BoundaryKind.ARC)
PIPELINE_STAGES = ("calibrate", "measure", "characterize", "contact", "force-table", "infer-force")

# 20 (s, r) pairs for the view-area disclosure table
ANALYTIC_PAIRS = tuple((s, r) for r in (2.0, 3.0, 5.0, 8.0) for s in (0.5, 1.0, 2.0, 3.0, 4.0))


def _option(section: str, default: Any, kind: str = "float") -> Any:
    return field(default=default, metadata={"section": section, "kind": kind})


def _parse_option(kind: str, raw: str, name: str) -> Any:
    text = raw.strip()
    try:
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if kind == "int":
            return int(text)
        if kind == "floats":
            return tuple(float(part) for part in text.split(",") if part.strip())
        if kind == "seed":
            return None if text.lower() in ("", "none") else int(text)
        return text
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None


def _format_option(kind: str, value: Any) -> str:
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "seed":
        return "none" if value is None else str(value)
    if kind == "float":
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every tunable of a run, grouped into config-file sections.

    Field names double as config keys; ``show-config`` prints this object
    with ``to_text`` and ``from_text`` reads it back unchanged.
    """

    # [sensor]
    separation_mm: float = _option("sensor", EMITTER_RECEIVER_SEPARATION_MM)
    half_fov_deg: float = _option("sensor", HALF_FOV_DEG)
    emitter_rays: int = _option("sensor", EMITTER_RAYS, "int")
    aperture_half_width_mm: float = _option("sensor", RECEIVER_APERTURE_HALF_WIDTH_MM)
    # [elastomer]
    refractive_index: float = _option("elastomer", PDMS_INDEX)
    flat_thickness_mm: float = _option("elastomer", FLAT_THICKNESS_MM)
    arc_thickness_mm: float = _option("elastomer", ARC_THICKNESS_MM)
    arc_radius_mm: float = _option("elastomer", ARC_THICKNESS_MM)
    blocker_thickness_mm: float = _option("elastomer", BLOCKER_THICKNESS_MM)
    blocker_clearance_mm: float = _option("elastomer", BLOCKER_CLEARANCE_MM)
    blocker_x_mm: float = _option("elastomer", 0.0)
    span_mm: float = _option("elastomer", BOUNDARY_SPAN_MM)
    # [trace]
    scatter_rays: int = _option("trace", SCATTER_RAYS, "int")
    power_floor: float = _option("trace", POWER_FLOOR)
    bounce_cap: int = _option("trace", BOUNCE_CAP, "int")
    scatter_seed: Optional[int] = _option("trace", None, "seed")
    # [spring]
    stiffness_n_per_mm: float = _option("spring", SPRING_STIFFNESS_N_PER_MM)
    max_force_n: float = _option("spring", SPRING_MAX_FORCE_N)
    # [sweep]
    axis: str = _option("sweep", "distance", "str")
    distance_min_mm: float = _option("sweep", 10.0)
    distance_max_mm: float = _option("sweep", MAX_PROXIMITY_MM)
    distance_points: int = _option("sweep", 26, "int")
    depth_min_mm: float = _option("sweep", 0.0)
    depth_max_mm: float = _option("sweep", 5.0)
    depth_points: int = _option("sweep", 11, "int")
    radius_min_mm: float = _option("sweep", 10.0)
    radius_max_mm: float = _option("sweep", 30.0)
    radius_points: int = _option("sweep", 21, "int")
    reflectivities: tuple[float, ...] = _option("sweep", DEFAULT_REFLECTIVITIES, "floats")
    # [optimizer]
    crosstalk_weight: float = _option("optimizer", 1.0)
    sensitivity_weight: float = _option("optimizer", 0.0)
    radius_lower_mm: float = _option("optimizer", 10.0)
    radius_upper_mm: float = _option("optimizer", 30.0)
    thickness_lower_mm: float = _option("optimizer", ARC_THICKNESS_MM)
    thickness_upper_mm: float = _option("optimizer", ARC_THICKNESS_MM)
    grid_points: int = _option("optimizer", GRID_POINTS, "int")
    sweeps: int = _option("optimizer", GOLDEN_SWEEPS, "int")
    defocus_weight: float = _option("optimizer", DEFOCUS_WEIGHT)
    # [pipeline]
    true_reflectivity: float = _option("pipeline", 0.5)
    probe_distance_mm: float = _option("pipeline", 30.0)
    approach_start_mm: float = _option("pipeline", MAX_PROXIMITY_MM)
    approach_step_mm: float = _option("pipeline", 0.5)
    force_levels_n: tuple[float, ...] = _option("pipeline", (2.0, 4.0, 6.0, 8.0, 10.0), "floats")
    # [output]
    directory: str = _option("output", "", "str")
    proximity_csv: str = _option("output", "proximity.csv", "str")
    force_csv: str = _option("output", "force.csv", "str")
    radius_csv: str = _option("output", "radius.csv", "str")
    optimize_csv: str = _option("output", "optimize.csv", "str")
    analytic_csv: str = _option("output", "analytic-check.csv", "str")
    diagram_svg: str = _option("output", "diagram.svg", "str")
    fit_file: str = _option("output", "intensity-fit.txt", "str")
    force_table_file: str = _option("output", "force-table.txt", "str")
    report_json: str = _option("output", "pipeline.json", "str")

    def __post_init__(self):
        for name in ("distance", "depth", "radius"):
            lo = getattr(self, f"{name}_min_mm")
            hi = getattr(self, f"{name}_max_mm")
            points = getattr(self, f"{name}_points")
            if points < 1:
                raise ConfigError(f"sweep.{name}_points: need at least 1 point, got {points}")
            if points == 1 and lo != hi:
                raise ConfigError(f"sweep.{name}_points: a single point needs min == max")
            if points > 1 and not lo < hi:
                raise ConfigError(f"sweep.{name}_max_mm: grid must be strictly increasing")
        if self.distance_min_mm <= 0:
            raise ConfigError("sweep.distance_min_mm: distances must be positive")
        if self.depth_min_mm < 0:
            raise ConfigError("sweep.depth_min_mm: depths must be >= 0")
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: expected one of {', '.join(SWEEP_AXES)}, got {self.axis!r}")
        if not self.reflectivities:
            raise ConfigError("sweep.reflectivities: need at least one value")
        if any(not 0.0 <= rho <= 1.0 for rho in self.reflectivities):
            raise ConfigError("sweep.reflectivities: values must lie in [0, 1]")
        if len(set(self.reflectivities)) != len(self.reflectivities):
            raise ConfigError("sweep.reflectivities: values must be distinct")
        if not 0.0 <= self.true_reflectivity <= 1.0:
            raise ConfigError("pipeline.true_reflectivity: must lie in [0, 1]")
        if self.approach_step_mm <= 0:
            raise ConfigError("pipeline.approach_step_mm: must be positive")
        if any(not 0.0 < f <= self.max_force_n for f in self.force_levels_n):
            raise ConfigError(
                f"pipeline.force_levels_n: forces must lie in (0, {self.max_force_n}] N"
            )

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> ExperimentConfig:
        """Parse a sectioned config file; absent keys keep their defaults.

        Raises:
            ConfigError: Naming the offending ``section.key``.
        """
        schema: dict[str, dict[str, Any]] = {}
        for f in fields(cls):
            schema.setdefault(f.metadata["section"], {})[f.name] = f
        raw = read_sections(text, schema, source)
        values = {}
        for section, items in raw.items():
            for key, value in items.items():
                kind = schema[section][key].metadata["kind"]
                values[key] = _parse_option(kind, value, f"{section}.{key}")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_text(text, source=str(path))

    def to_text(self) -> str:
        """Render every option, defaults included, in config-file syntax."""
        lines: list[str] = []
        section = None
        for f in fields(self):
            if f.metadata["section"] != section:
                section = f.metadata["section"]
                if lines:
                    lines.append("")
                lines.append(f"[{section}]")
            lines.append(f"{f.name} = {_format_option(f.metadata['kind'], getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Short hash of the resolved config, for run logs."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:12]

    def output_path(self, name: str, directory: str | Path | None = None) -> Path:
        """Resolve an ``[output]`` file name against the output directory."""
        base = Path(self.directory) if self.directory else Path(directory or ".")
        return base.expanduser() / name

    def distances(self, contact_mm: float = 0.0) -> tuple[float, ...]:
        """Distance grid starting no closer than ``contact_mm``.

        Each configuration sweeps from its own contact distance (its
        thickness) out to the far end; empty when contact lies beyond it.
        """
        lo = max(self.distance_min_mm, contact_mm)
        if lo > self.distance_max_mm:
            return ()
        if lo == self.distance_max_mm:
            return (float(lo),)
        return _grid(lo, self.distance_max_mm, self.distance_points)

    def depths(self) -> tuple[float, ...]:
        return _grid(self.depth_min_mm, self.depth_max_mm, self.depth_points)

    def radii(self) -> tuple[float, ...]:
        return _grid(self.radius_min_mm, self.radius_max_mm, self.radius_points)

    def head(self) -> SensorHead:
        return SensorHead.centered(
            separation=self.separation_mm,
            half_fov_deg=self.half_fov_deg,
            fan_size=self.emitter_rays,
            aperture_half_width=self.aperture_half_width_mm,
        )

    def boundary(self, kind: BoundaryKind | str) -> BoundaryConfig:
        kind = BoundaryKind(kind)
        if kind is BoundaryKind.BARE:
            return BoundaryConfig.bare()
        if kind is BoundaryKind.FLAT:
            return BoundaryConfig.flat(self.flat_thickness_mm, span=self.span_mm)
        if kind is BoundaryKind.ARC:
            return BoundaryConfig.arc(self.arc_radius_mm, self.arc_thickness_mm, span=self.span_mm)
        return BoundaryConfig.blocker(
            self.blocker_thickness_mm,
            blocker_height=self.blocker_thickness_mm - self.blocker_clearance_mm,
            blocker_x=self.blocker_x_mm,
            span=self.span_mm,
        )

    def template(self, kind: BoundaryKind | str) -> Scene:
        """Target-free scene for ``kind`` carrying the head, media and trace settings."""
        return Scene(
            head=self.head(),
            boundary=self.boundary(kind),
            elastomer=Medium(self.refractive_index),
            scatter_fan=self.scatter_rays,
            power_floor=self.power_floor,
            bounce_cap=self.bounce_cap,
            scatter_seed=self.scatter_seed,
        )

    def spring(self) -> SpringModel:
        return SpringModel(self.stiffness_n_per_mm, self.max_force_n)

    def objective_spec(self) -> ObjectiveSpec:
        return ObjectiveSpec(
            crosstalk_weight=self.crosstalk_weight,
            sensitivity_weight=self.sensitivity_weight,
            radius_bounds=(self.radius_lower_mm, self.radius_upper_mm),
            thickness_bounds=(self.thickness_lower_mm, self.thickness_upper_mm),
            grid_points=self.grid_points,
            sweeps=self.sweeps,
            defocus_weight=self.defocus_weight,
        )


def _grid(lo: float, hi: float, points: int) -> tuple[float, ...]:
    if points == 1:
        return (float(lo),)
    return tuple(round(float(x), 9) for x in np.linspace(lo, hi, points))


@contextmanager
def worker_pool(workers: int) -> Iterator[Mapper]:
    """Yield an order-preserving ``map``; a process pool when ``workers > 1``."""
    if workers <= 1:
        yield map
        return
    with Pool(workers) as pool:
        yield pool.map


def build_scene(
    config: ExperimentConfig,
    kind: BoundaryKind | str,
    distance: Optional[float] = None,
    reflectivity: float = 0.5,
    depth: float = 0.0,
) -> Scene:
    """Scene for one reading: no target, a target at ``distance``, or pressed ``depth`` mm in."""
    template = config.template(kind)
    if depth > 0:
        return contact_scene(template, reflectivity, depth)
    if distance is None:
        return template
    return replace(template, target=Target(distance, reflectivity))


def _proximity_task(args) -> SweepRow:
    template, distance, rho = args
    reading = simulate(replace(template, target=Target(distance, rho)))
    return SweepRow(
        template.boundary.kind.value,
        distance,
        rho,
        0.0,
        0.0,
        reading.range_mm,
        reading.intensity,
        reading.crosstalk,
    )


def _force_task(args) -> SweepRow:
    template, depth, rho, spring = args
    reading = simulate(contact_scene(template, rho, depth))
    return SweepRow(
        template.boundary.kind.value,
        template.boundary.thickness - depth,
        rho,
        depth,
        force_from_depth(spring, depth),
        reading.range_mm,
        reading.intensity,
        reading.crosstalk,
    )


def _radius_task(args) -> Evaluation:
    return evaluate_arc(*args)


def contact_distance(template: Scene) -> float:
    """Target distance at which the target first touches the boundary; 0 when bare."""
    return template.boundary.thickness if template.boundary.has_elastomer else 0.0


def proximity_points(config: ExperimentConfig, kinds: Sequence[BoundaryKind] = PROXIMITY_KINDS):
    """Grid-ordered (template, d, rho) tasks.

    Each configuration gets its own grid from its contact distance outward.
    """
    tasks = []
    for kind in kinds:
        template = config.template(kind)
        for distance in config.distances(contact_distance(template)):
            tasks.extend((template, distance, rho) for rho in config.reflectivities)
    return tasks


def run_proximity_sweep(
    config: ExperimentConfig,
    mapper: Mapper = map,
    kinds: Sequence[BoundaryKind] = PROXIMITY_KINDS,
) -> list[SweepRow]:
    """One row per (configuration, d, rho), with range, intensity and crosstalk."""
    return list(mapper(_proximity_task, proximity_points(config, kinds)))


def run_force_sweep(
    config: ExperimentConfig,
    mapper: Mapper = map,
    kinds: Sequence[BoundaryKind] = FORCE_KINDS,
) -> list[SweepRow]:
    """One row per (configuration, depth, rho) with the spring force of that depth.

    Raises:
        ConfigError: If the depth grid reaches any configuration's thickness.
    """
    spring = config.spring()
    tasks = []
    for kind in kinds:
        template = config.template(kind)
        if config.depth_max_mm >= template.boundary.thickness:
            raise ConfigError(
                f"sweep.depth_max_mm: {config.depth_max_mm} mm reaches the {kind.value} "
                f"thickness of {template.boundary.thickness} mm"
            )
        for depth in config.depths():
            tasks.extend((template, depth, rho, spring) for rho in config.reflectivities)
    return list(mapper(_force_task, tasks))


def run_radius_sweep(config: ExperimentConfig, mapper: Mapper = map) -> list[Evaluation]:
    """Objective terms for each arc radius at the configured arc thickness."""
    spec = config.objective_spec()
    template = config.template(BoundaryKind.ARC)
    tasks = [(r, config.arc_thickness_mm, spec, template) for r in config.radii()]
    return list(mapper(_radius_task, tasks))


def sweep_csv(config: ExperimentConfig, axis: Optional[str] = None, mapper: Mapper = map) -> str:
    """CSV text of the sweep along ``axis`` (default: the configured one)."""
    axis = axis or config.axis
    if axis == "distance":
        return sweep_csv_text(run_proximity_sweep(config, mapper))
    if axis == "depth":
        return sweep_csv_text(run_force_sweep(config, mapper))
    if axis == "radius":
        return optim_csv_text(run_radius_sweep(config, mapper))
    raise ConfigError(f"sweep.axis: expected one of {', '.join(SWEEP_AXES)}, got {axis!r}")


def run_optimize(
    config: ExperimentConfig,
    mapper: Mapper = map,
    progress: Optional[Callable[[str], None]] = None,
) -> OptimResult:
    return optimize_arc(
        config.objective_spec(),
        config.template(BoundaryKind.ARC),
        mapper=mapper,
        progress=progress,
    )


def fit_samples(
    rows: Sequence[SweepRow],
    kind: BoundaryKind | str,
    reflectivity: float,
    by_range: bool = False,
) -> list[tuple[float, float]]:
    """(d, intensity) pairs of one configuration and reflectivity from sweep rows.

    With ``by_range`` the sensor's range reading replaces the true distance,
    which is how the pipeline indexes its calibration curves. No-signal rows
    are dropped then.
    """
    kind = BoundaryKind(kind).value
    return [
        (row.range_mm if by_range else row.d_mm, row.intensity)
        for row in rows
        if row.config_kind == kind
        and math.isclose(row.rho, reflectivity)
        and (not by_range or row.range_mm >= 0)
    ]


# ---------------------------------------------------------------------------
# Proximity-to-force pipeline
# ---------------------------------------------------------------------------


@dataclass
class StageResult:
    name: str
    status: str
    detail: dict[str, Any] = field(default_factory=dict)


class ForceCheck(NamedTuple):
    true_force: float
    depth_mm: float
    intensity: float
    inferred_force: float
    saturated: bool
    relative_error: float


@dataclass
class PipelineReport:
    """Step-by-step record of one pipeline run, ground truth next to inference."""

    true_reflectivity: float
    true_contact_mm: float
    stages: list[StageResult] = field(default_factory=list)
    estimated_reflectivity: Optional[float] = None
    detected_contact_mm: Optional[float] = None
    force_checks: list[ForceCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(stage.status == "ok" for stage in self.stages)

    def stage(self, name: str) -> StageResult:
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["force_checks"] = [check._asdict() for check in self.force_checks]
        data["ok"] = self.ok
        return data


@dataclass(frozen=True)
class CalibrationSet:
    """Per-reflectivity curves measured on the template, indexed by range reading."""

    profiles: dict[float, IntensityCurve]
    fits: dict[float, Optional[IntensityFit]]
    touch_ranges: dict[float, float]

    def touch_range(self, reflectivity: float) -> float:
        """Range read with the target resting on the undeformed boundary."""
        rhos = sorted(self.touch_ranges)
        return float(np.interp(reflectivity, rhos, [self.touch_ranges[r] for r in rhos]))


def calibrate(config: ExperimentConfig, template: Scene, mapper: Mapper = map) -> CalibrationSet:
    """Simulate a proximity sweep per configured reflectivity and tabulate it.

    The grid runs from the touching position out to the sweep's far end and
    always includes the pipeline probe distance.

    Raises:
        CalibrationError: If a reflectivity returns no signal.
    """
    contact = contact_distance(template)
    grid = sorted(set(config.distances(contact)) | {config.probe_distance_mm, contact})
    rhos = sorted(config.reflectivities)
    tasks = [(template, d, rho) for rho in rhos for d in grid]
    rows = list(mapper(_proximity_task, tasks))

    profiles: dict[float, IntensityCurve] = {}
    fits: dict[float, Optional[IntensityFit]] = {}
    touch: dict[float, float] = {}
    for rho in rhos:
        mine = [row for row in rows if row.rho == rho and row.range_mm >= 0]
        if len(mine) < 2:
            raise CalibrationError(f"reflectivity {rho} returned no usable signal")
        profiles[rho] = IntensityProfile.from_samples([(r.range_mm, r.intensity) for r in mine])
        try:
            fits[rho] = fit_intensity([(r.range_mm, r.intensity) for r in mine])
        except CalibrationError:
            fits[rho] = None
        touch[rho] = min(mine, key=lambda row: row.d_mm).range_mm
    return CalibrationSet(profiles, fits, touch)


def loaded_calibration(
    template: Scene, fits: Mapping[float, IntensityFit], mapper: Mapper = map
) -> CalibrationSet:
    """Calibration from a saved fit family; only the touch ranges are simulated.

    The fits must be indexed by range reading (``fit --by-range``).

    Raises:
        CalibrationError: If fewer than 2 fits are given or a touch reading has no signal.
    """
    if len(fits) < 2:
        raise CalibrationError(f"a fit family needs at least 2 reflectivities, got {len(fits)}")
    rhos = sorted(fits)
    contact = contact_distance(template)
    rows = list(mapper(_proximity_task, [(template, contact, rho) for rho in rhos]))
    touch: dict[float, float] = {}
    for rho, row in zip(rhos, rows):
        if row.range_mm < 0:
            raise CalibrationError(f"reflectivity {rho} returned no signal at contact")
        touch[rho] = row.range_mm
    family = {rho: fits[rho] for rho in rhos}
    return CalibrationSet(dict(family), dict(family), touch)


def approach_positions(config: ExperimentConfig, thickness: float) -> list[tuple[float, float]]:
    """(target distance, depth) samples from the approach start into contact."""
    step = config.approach_step_mm
    positions: list[tuple[float, float]] = []
    count = max(0, math.floor((config.approach_start_mm - thickness) / step + 1e-9))
    for i in range(count + 1):
        distance = config.approach_start_mm - i * step
        if distance > thickness + 1e-9:
            positions.append((round(distance, 9), 0.0))
    positions.append((thickness, 0.0))
    depth = step
    while depth <= config.depth_max_mm + 1e-9:
        positions.append((round(thickness - depth, 9), round(depth, 9)))
        depth += step
    return positions


def detect_contact(
    samples: Sequence[tuple[float, float]], touch_range: float, drop: float = CONTACT_RANGE_DROP_MM
) -> Optional[int]:
    """Index of the contact onset in ``(distance, range)`` samples, or None.

    Once a sample reads more than ``drop`` below ``touch_range``, the onset is
    the last earlier sample whose range is not below ``touch_range``.
    """
    tolerance = 1e-9 * max(1.0, abs(touch_range))
    for j, (_, range_mm) in enumerate(samples):
        if 0 <= range_mm < touch_range - drop:
            earlier = [i for i in range(j) if samples[i][1] >= touch_range - tolerance]
            if earlier:
                return earlier[-1]
            return j - 1 if j > 0 else None
    return None


def _skip_remaining(report: PipelineReport) -> PipelineReport:
    done = {stage.name for stage in report.stages}
    report.stages.extend(StageResult(name, "skipped") for name in PIPELINE_STAGES if name not in done)
    return report


def run_full_pipeline(
    config: ExperimentConfig,
    mapper: Mapper = map,
    progress: Optional[Callable[[str], None]] = None,
    fits: Optional[Mapping[float, IntensityFit]] = None,
    force_table: Optional[ForceTable] = None,
) -> PipelineReport:
    """Measure, characterize, detect contact, and infer force on the arc configuration.

    A saved fit family (``fits``, keyed by reflectivity) replaces the in-run
    calibration sweep, and a saved ``force_table`` replaces the simulated one.
    Stage failures are recorded in the report and skip the stages that
    depend on them; they never raise.
    """
    template = config.template(BoundaryKind.ARC)
    thickness = template.boundary.thickness
    rho_true = config.true_reflectivity
    spring = config.spring()
    report = PipelineReport(true_reflectivity=rho_true, true_contact_mm=thickness)

    def note(message: str) -> None:
        if progress:
            progress(message)

    try:
        if fits is None:
            calibration = calibrate(config, template, mapper)
        else:
            calibration = loaded_calibration(template, fits, mapper)
    except PcfError as e:
        report.stages.append(StageResult("calibrate", "failed", {"error": str(e)}))
        return _skip_remaining(report)
    report.stages.append(
        StageResult(
            "calibrate",
            "ok",
            {
                "source": "simulated" if fits is None else "loaded",
                "reflectivities": sorted(calibration.profiles),
                "touch_ranges_mm": {str(k): v for k, v in calibration.touch_ranges.items()},
                "fit_rms": {
                    str(k): (fit.rms if fit else None) for k, fit in calibration.fits.items()
                },
            },
        )
    )
    note(f"calibrated {len(calibration.profiles)} reflectivities")

    reading = simulate(replace(template, target=Target(config.probe_distance_mm, rho_true)))
    measured = {
        "distance_mm": config.probe_distance_mm,
        "range_mm": reading.range_mm,
        "intensity": reading.intensity,
        "crosstalk": reading.crosstalk,
    }
    if not reading.has_signal or reading.target_return <= 0.0:
        report.stages.append(StageResult("measure", "no-signal", measured))
        note("no target return at the probe distance")
        return _skip_remaining(report)
    report.stages.append(StageResult("measure", "ok", measured))

    try:
        profile = characterize_reflectivity(reading.range_mm, reading.intensity, calibration.profiles)
    except PcfError as e:
        report.stages.append(StageResult("characterize", "failed", {"error": str(e)}))
        return _skip_remaining(report)
    detail: dict[str, Any] = {
        "reflectivity": profile.reflectivity,
        "residual": profile.residual,
        "extrapolated": profile.extrapolated,
    }
    fits = {rho: fit for rho, fit in calibration.fits.items() if fit is not None}
    if len(fits) >= 2:
        detail["fit_reflectivity"] = characterize_reflectivity(
            reading.range_mm, reading.intensity, fits
        ).reflectivity
    report.estimated_reflectivity = profile.reflectivity
    report.stages.append(StageResult("characterize", "ok", detail))
    note(f"reflectivity {profile.reflectivity:.4f} (true {rho_true})")

    touch = calibration.touch_range(profile.reflectivity)
    samples = []
    for distance, depth in approach_positions(config, thickness):
        scene = (
            contact_scene(template, rho_true, depth)
            if depth > 0
            else replace(template, target=Target(distance, rho_true))
        )
        samples.append((distance, simulate(scene).range_mm))
    onset = detect_contact(samples, touch)
    if onset is None:
        report.stages.append(
            StageResult("contact", "failed", {"error": "range never dropped below threshold"})
        )
        return _skip_remaining(report)
    report.detected_contact_mm = samples[onset][0]
    report.stages.append(
        StageResult(
            "contact",
            "ok",
            {
                "touch_range_mm": touch,
                "detected_mm": report.detected_contact_mm,
                "error_mm": abs(report.detected_contact_mm - thickness),
                "samples": len(samples),
            },
        )
    )
    note(f"contact detected at {report.detected_contact_mm} mm")

    if force_table is not None:
        table = force_table
    else:
        try:
            table = build_force_table(template, profile.reflectivity, config.depths(), spring)
        except (PcfError, ValueError) as e:
            report.stages.append(StageResult("force-table", "failed", {"error": str(e)}))
            return _skip_remaining(report)
    report.stages.append(
        StageResult(
            "force-table",
            "ok",
            {
                "source": "simulated" if force_table is None else "loaded",
                "reflectivity": table.reflectivity,
                "knots": len(table.forces),
                "intensity_span": table.intensities[0] - table.intensities[-1],
            },
        )
    )

    failures = []
    for force in config.force_levels_n:
        try:
            depth = depth_from_force(spring, force)
            intensity = simulate(contact_scene(template, rho_true, depth)).intensity
        except PcfError as e:
            failures.append(f"{force} N: {e}")
            continue
        estimate = infer_force(table, intensity)
        report.force_checks.append(
            ForceCheck(
                true_force=force,
                depth_mm=depth,
                intensity=intensity,
                inferred_force=estimate.force,
                saturated=estimate.saturated,
                relative_error=abs(estimate.force - force) / force,
            )
        )
    report.stages.append(
        StageResult(
            "infer-force",
            "failed" if failures else "ok",
            {
                "levels": len(report.force_checks),
                "max_relative_error": max(
                    (c.relative_error for c in report.force_checks), default=None
                ),
                **({"errors": failures} if failures else {}),
            },
        )
    )
    return report


# ---------------------------------------------------------------------------
# View-area disclosure
# ---------------------------------------------------------------------------


class AnalyticCheckRow(NamedTuple):
    s_mm: float
    r_mm: float
    formula_mm2: float
    exact_mm2: float
    monte_carlo_mm2: float


def run_analytic_check(
    pairs: Sequence[tuple[float, float]] = ANALYTIC_PAIRS,
    samples: int = 1_000_000,
    seed: int = 0,
) -> list[AnalyticCheckRow]:
    """Closed-form view area next to the exact lens area and a Monte Carlo estimate.

    No agreement is asserted; the table documents how far the closed form is
    from the true two-disc intersection.
    """
    return [
        AnalyticCheckRow(
            s,
            r,
            analytic_view_area(s, r),
            exact_lens_area(s, r),
            area_view_oracle(s, r, samples=samples, seed=seed + i),
        )
        for i, (s, r) in enumerate(pairs)
    ]


def analytic_check_csv(rows: Sequence[AnalyticCheckRow]) -> str:
    return analytic_csv_text(rows)
