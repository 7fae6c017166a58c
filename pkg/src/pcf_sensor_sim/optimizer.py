"""Search over arc radius and elastomer thickness.

The default objective is pure receiver crosstalk, which drives the emitter to
the focus of the arc. A sensitivity weight trades crosstalk against how much
contact intensity changes per millimeter of indentation.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .constants import (
    DEFOCUS_WEIGHT,
    GOLDEN_SWEEPS,
    GRID_POINTS,
    INV_PHI,
    SENSITIVITY_DEPTHS_MM,
    SENSITIVITY_REFLECTIVITY,
)
from .exceptions import BoundaryError
from .models import BoundaryConfig, BoundaryKind, Indentation, Scene, Target
from .sensor import simulate, synthesize_reading, trace

# Golden-section stops once its bracket is this fraction of the grid step
_GOLDEN_RELATIVE_TOLERANCE = 1e-4


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weights, parameter box and grid for ``optimize_arc``."""

    crosstalk_weight: float = 1.0
    sensitivity_weight: float = 0.0
    radius_bounds: tuple[float, float] = (10.0, 30.0)
    thickness_bounds: tuple[float, float] = (17.75, 17.75)
    grid_points: int = GRID_POINTS
    sweeps: int = GOLDEN_SWEEPS
    defocus_weight: float = DEFOCUS_WEIGHT
    sensitivity_depths: tuple[float, ...] = SENSITIVITY_DEPTHS_MM
    sensitivity_reflectivity: float = SENSITIVITY_REFLECTIVITY

    def __post_init__(self):
        if self.crosstalk_weight < 0 or self.sensitivity_weight < 0:
            raise ValueError("objective weights must be >= 0")
        if self.crosstalk_weight == 0 and self.sensitivity_weight == 0:
            raise ValueError("at least one objective weight must be positive")
        for name, (lo, hi) in (
            ("radius", self.radius_bounds),
            ("thickness", self.thickness_bounds),
        ):
            if not 0 < lo <= hi:
                raise ValueError(f"{name} bounds must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if self.grid_points < 1:
            raise ValueError("grid needs at least one point per axis")
        if len(self.sensitivity_depths) < 2:
            raise ValueError("sensitivity needs at least two depths")


class Evaluation(NamedTuple):
    radius: float
    thickness: float
    crosstalk: float
    sensitivity: float
    objective: float


@dataclass(frozen=True)
class OptimResult:
    best: Evaluation
    trace: tuple[Evaluation, ...]

    @property
    def radius(self) -> float:
        return self.best.radius

    @property
    def thickness(self) -> float:
        return self.best.thickness

    @property
    def objective(self) -> float:
        return self.best.objective

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def crosstalk_objective(
    config: BoundaryConfig, template: Scene, defocus_weight: float = DEFOCUS_WEIGHT
) -> float:
    """Receiver crosstalk of ``config`` with no target, plus a defocus term.

    The defocus term is the power-weighted mean distance between the emitter
    and where singly-reflected boundary light lands on the sensor plane,
    divided by the boundary span. It vanishes when the emitter sits at the
    arc's focus.
    """
    scene = replace(template, boundary=config, indentation=Indentation(), target=None)
    result = trace(scene)
    crosstalk = synthesize_reading(result.records).crosstalk
    if defocus_weight == 0.0 or not config.has_elastomer:
        return crosstalk
    returned = ~result.plane_tagged & (result.plane_bounces == 1)
    power = result.plane_power[returned]
    if power.sum() <= 0.0:
        return crosstalk
    offset = np.abs(result.plane_x[returned] - scene.head.emitter.x)
    defocus = float((power * offset).sum() / power.sum()) / config.span
    return crosstalk + defocus_weight * defocus


def sensitivity(
    config: BoundaryConfig,
    template: Scene,
    depths: Iterable[float] = SENSITIVITY_DEPTHS_MM,
    reflectivity: float = SENSITIVITY_REFLECTIVITY,
) -> float:
    """Mean absolute intensity change per millimeter over ``depths`` in contact."""
    depths = list(depths)
    intensities = []
    for depth in depths:
        scene = replace(
            template,
            boundary=config,
            indentation=Indentation(depth),
            target=Target(config.thickness - depth, reflectivity),
        )
        intensities.append(simulate(scene).intensity)
    slopes = [
        abs(i1 - i0) / (d1 - d0)
        for (d0, i0), (d1, i1) in zip(zip(depths, intensities), zip(depths[1:], intensities[1:]))
    ]
    return float(np.mean(slopes))


def evaluate_arc(
    radius: float, thickness: float, spec: ObjectiveSpec, template: Scene
) -> Evaluation:
    """Score one (radius, thickness) pair; infeasible arcs score ``inf``."""
    try:
        config = BoundaryConfig(
            BoundaryKind.ARC, thickness, radius=radius, span=template.boundary.span
        )
        crosstalk = crosstalk_objective(config, template, spec.defocus_weight)
        sens = (
            sensitivity(
                config, template, spec.sensitivity_depths, spec.sensitivity_reflectivity
            )
            if spec.sensitivity_weight > 0
            else 0.0
        )
    except BoundaryError:
        return Evaluation(radius, thickness, math.inf, 0.0, math.inf)
    objective = spec.crosstalk_weight * crosstalk - spec.sensitivity_weight * sens
    return Evaluation(radius, thickness, crosstalk, sens, objective)


def _evaluate_task(args) -> Evaluation:
    return evaluate_arc(*args)


def _axis(bounds: tuple[float, float], points: int) -> np.ndarray:
    lo, hi = bounds
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, points)


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tolerance: float
) -> float:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns the best abscissa probed."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while b - a > tolerance:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            if fd < best_f:
                best_x, best_f = d, fd
    return best_x


def _better(candidate: Evaluation, incumbent: Evaluation) -> bool:
    if candidate.objective != incumbent.objective:
        return candidate.objective < incumbent.objective
    return (candidate.radius, candidate.thickness) < (incumbent.radius, incumbent.thickness)


def _line_objective(evaluate, anchor: tuple[float, float], axis: int) -> Callable[[float], float]:
    def along(x: float) -> float:
        point = list(anchor)
        point[axis] = x
        return evaluate(*point).objective

    return along


def optimize_arc(
    spec: ObjectiveSpec,
    template: Scene,
    *,
    mapper: Optional[Callable] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> OptimResult:
    """Grid scan then per-coordinate golden-section refinement.

    Args:
        spec: Objective weights, box and grid size.
        template: Scene supplying the head, media and trace settings.
        mapper: ``map``-like callable for the grid scan, e.g. an executor's
            ``map``; results are consumed in grid order.
        progress: Optional callback for human-readable progress lines.

    Returns:
        The incumbent and every evaluation in the order it was made. Ties go
        to the smaller radius.
    """
    mapper = mapper or map
    cache: dict[tuple[float, float], Evaluation] = {}
    history: list[Evaluation] = []

    def record(evaluation: Evaluation) -> Evaluation:
        key = (evaluation.radius, evaluation.thickness)
        if key not in cache:
            cache[key] = evaluation
            history.append(evaluation)
        return cache[key]

    def evaluate(radius: float, thickness: float) -> Evaluation:
        key = (radius, thickness)
        if key in cache:
            return cache[key]
        return record(evaluate_arc(radius, thickness, spec, template))

    radii = _axis(spec.radius_bounds, spec.grid_points)
    thicknesses = _axis(spec.thickness_bounds, spec.grid_points)
    grid = [(float(r), float(t), spec, template) for r in radii for t in thicknesses]
    best: Optional[Evaluation] = None
    for evaluation in mapper(_evaluate_task, grid):
        evaluation = record(evaluation)
        if best is None or _better(evaluation, best):
            best = evaluation
    if progress:
        progress(
            f"grid: {len(grid)} points, best r={best.radius:.4f} t={best.thickness:.4f} "
            f"objective={best.objective:.6g}"
        )

    steps = [
        (radii[1] - radii[0]) if len(radii) > 1 else 0.0,
        (thicknesses[1] - thicknesses[0]) if len(thicknesses) > 1 else 0.0,
    ]
    bounds = [spec.radius_bounds, spec.thickness_bounds]
    for sweep in range(spec.sweeps):
        for axis in (0, 1):
            step = steps[axis]
            if step == 0.0 or not math.isfinite(best.objective):
                continue
            center = best[axis]
            lo = max(bounds[axis][0], center - step)
            hi = min(bounds[axis][1], center + step)

            along = _line_objective(evaluate, (best.radius, best.thickness), axis)
            x = golden_section(along, lo, hi, _GOLDEN_RELATIVE_TOLERANCE * step)
            point = [best.radius, best.thickness]
            point[axis] = x
            candidate = evaluate(*point)
            if candidate.objective < best.objective:
                best = candidate
        if progress:
            progress(
                f"sweep {sweep + 1}: r={best.radius:.4f} t={best.thickness:.4f} "
                f"objective={best.objective:.6g}"
            )

    return OptimResult(best=best, trace=tuple(history))
