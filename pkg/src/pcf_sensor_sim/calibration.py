"""Intensity-law fitting, reflectivity characterization and force lookup.

The reflectivity and force steps implement the proximity-then-contact
pipeline: read the target's reflectivity while it approaches, then invert
intensity to force with the table built for that reflectivity.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Protocol

import numpy as np

from .constants import (
    EXTRAPOLATION_MARGIN,
    FIT_GRADIENT_TOLERANCE,
    FIT_MAX_ITERATIONS,
)
from .elastomer import force_from_depth
from .exceptions import CalibrationError
from .models import Indentation, Scene, SpringModel, Target
from .sensor import analytic_intensity, intensity_jacobian, simulate

# Damping bounds for the Levenberg-Marquardt loop
_LAMBDA_START = 1e-3
_LAMBDA_MAX = 1e16


class IntensityCurve(Protocol):
    """Anything that predicts intensity from a range reading."""

    def predict(self, range_mm): ...


@dataclass(frozen=True)
class IntensityFit:
    """Fitted ``kappa * sqrt(d^2 - zeta^2) / d^2 + chi`` law."""

    kappa: float
    zeta: float
    chi: float
    rms: float
    iterations: int
    converged: bool
    gradient_norm: float
    cost_history: tuple[float, ...] = ()

    def predict(self, range_mm):
        return analytic_intensity(range_mm, self.kappa, self.zeta, self.chi)


@dataclass(frozen=True)
class IntensityProfile:
    """Tabulated intensity-vs-range curve, piecewise linear, flat beyond its ends."""

    ranges: tuple[float, ...]
    intensities: tuple[float, ...]

    def __post_init__(self):
        if len(self.ranges) != len(self.intensities) or len(self.ranges) < 2:
            raise CalibrationError("an intensity profile needs at least 2 (range, intensity) pairs")

    @classmethod
    def from_samples(cls, samples: Sequence[tuple[float, float]]) -> IntensityProfile:
        """Build a profile from ``(range, intensity)`` pairs in any order."""
        ordered = sorted(samples)
        return cls(tuple(r for r, _ in ordered), tuple(i for _, i in ordered))

    def predict(self, range_mm):
        value = np.interp(range_mm, self.ranges, self.intensities)
        return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class ReflectivityProfile:
    """Estimated target reflectivity from one (range, intensity) reading."""

    reflectivity: float
    range_mm: float
    intensity: float
    residual: float
    extrapolated: bool


@dataclass(frozen=True)
class ForceTable:
    """Monotone intensity-to-force knots for one reflectivity.

    Forces increase and intensities strictly decrease along the knots.
    """

    reflectivity: float
    forces: tuple[float, ...]
    intensities: tuple[float, ...]

    def __post_init__(self):
        if len(self.forces) != len(self.intensities):
            raise CalibrationError("force table needs one intensity per force")
        if len(self.forces) < 2:
            raise CalibrationError(
                f"force table needs at least 2 monotone knots, got {len(self.forces)}"
            )
        if any(b <= a for a, b in zip(self.forces, self.forces[1:])):
            raise CalibrationError("force table forces must strictly increase")
        if any(b >= a for a, b in zip(self.intensities, self.intensities[1:])):
            raise CalibrationError("force table intensities must strictly decrease")

    @property
    def knots(self) -> list[tuple[float, float]]:
        return list(zip(self.intensities, self.forces))


class ForceEstimate(NamedTuple):
    force: float
    saturated: bool


def _residuals(d, y, params):
    kappa, zeta, chi = params
    return y - analytic_intensity(d, kappa, zeta, chi)


def _initial_guess(d: np.ndarray, y: np.ndarray) -> np.ndarray:
    chi = float(y.min())
    zeta = 0.9 * float(d.min())
    peak = int(np.argmax(y))
    d_peak = d[peak]
    root = math.sqrt(max(d_peak * d_peak - zeta * zeta, 0.0))
    kappa = (y[peak] - chi) * d_peak * d_peak / root if root > 0 else 0.0
    return np.array([max(kappa, 0.0), zeta, chi])


def fit_intensity(
    samples: Sequence[tuple[float, float]],
    *,
    tolerance: float = FIT_GRADIENT_TOLERANCE,
    max_iterations: int = FIT_MAX_ITERATIONS,
) -> IntensityFit:
    """Least-squares fit of the intensity law to ``(distance, intensity)`` samples.

    Uses damped Gauss-Newton with Levenberg-Marquardt scaling: the damping
    grows tenfold on a rejected step and shrinks tenfold on an accepted one,
    so the objective never increases.

    Args:
        samples: At least 4 ``(d, intensity)`` pairs with ``d > 0``.
        tolerance: Gradient-norm threshold for convergence.
        max_iterations: Cap on step attempts.

    Returns:
        The best iterate; ``converged`` is False if the gradient never fell
        below ``tolerance``.

    Raises:
        CalibrationError: On fewer than 4 samples, non-positive distances or
            samples that all share one distance.
    """
    if len(samples) < 4:
        raise CalibrationError(f"need at least 4 samples to fit, got {len(samples)}")
    d = np.array([s[0] for s in samples], dtype=float)
    y = np.array([s[1] for s in samples], dtype=float)
    if np.any(d <= 0):
        raise CalibrationError("sample distances must be positive")
    if np.ptp(d) == 0:
        raise CalibrationError("samples all share one distance; the law is unidentifiable")

    params = _initial_guess(d, y)
    residual = _residuals(d, y, params)
    cost = float(residual @ residual)
    history = [cost]
    damping = _LAMBDA_START
    gradient_norm = math.inf
    iterations = 0
    converged = False

    while iterations < max_iterations:
        jac = intensity_jacobian(d, *params)
        gradient = jac.T @ residual
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm < tolerance:
            converged = True
            break
        iterations += 1
        normal = jac.T @ jac
        scaled = normal + damping * np.diag(np.diag(normal) + 1e-12)
        try:
            step = np.linalg.solve(scaled, gradient)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        trial = params + step
        # the law depends on zeta only through zeta^2
        trial[1] = abs(trial[1])
        trial_residual = _residuals(d, y, trial)
        trial_cost = float(trial_residual @ trial_residual)
        if trial_cost < cost:
            params, residual, cost = trial, trial_residual, trial_cost
            history.append(cost)
            damping = max(damping / 10.0, 1e-12)
        else:
            damping *= 10.0
            if damping > _LAMBDA_MAX:
                break

    kappa, zeta, chi = (float(p) for p in params)
    return IntensityFit(
        kappa=kappa,
        zeta=zeta,
        chi=chi,
        rms=math.sqrt(cost / len(d)),
        iterations=iterations,
        converged=converged,
        gradient_norm=gradient_norm,
        cost_history=tuple(history),
    )


def characterize_reflectivity(
    range_mm: float, intensity: float, family: Mapping[float, IntensityCurve]
) -> ReflectivityProfile:
    """Estimate target reflectivity from one proximity reading.

    Each family member predicts the intensity it would read at ``range_mm``;
    the estimate interpolates linearly in reflectivity between the two
    bracketing predictions and is clipped to [0, 1]. Intensities more than
    20% outside the predicted envelope are flagged as extrapolated.

    Example:
        >>> family = {0.2: IntensityProfile((0, 50), (0.2, 0.2)),
        ...           0.8: IntensityProfile((0, 50), (0.8, 0.8))}
        >>> characterize_reflectivity(30.0, 0.5, family).reflectivity
        0.5
    """
    if len(family) < 2:
        raise CalibrationError("reflectivity characterization needs at least 2 family members")
    rhos = sorted(family)
    predictions = np.array([float(family[rho].predict(range_mm)) for rho in rhos])
    rho_arr = np.array(rhos, dtype=float)

    low, high = float(predictions.min()), float(predictions.max())
    extrapolated = bool(
        intensity > high * (1.0 + EXTRAPOLATION_MARGIN)
        or intensity < low * (1.0 - EXTRAPOLATION_MARGIN)
    )

    index = None
    for j in range(len(rhos) - 1):
        lo, hi = sorted((predictions[j], predictions[j + 1]))
        if lo <= intensity <= hi:
            index = j
            break
    if index is None:
        index = 0 if intensity < predictions[0] else len(rhos) - 2
    p0, p1 = predictions[index], predictions[index + 1]
    r0, r1 = rho_arr[index], rho_arr[index + 1]
    if p1 == p0:
        estimate = float(r0)
    else:
        estimate = float(r0 + (intensity - p0) * (r1 - r0) / (p1 - p0))
    clipped = min(1.0, max(0.0, estimate))
    if clipped != estimate:
        matched = p0 + (clipped - r0) * (p1 - p0) / (r1 - r0)
        residual = abs(intensity - float(matched))
    else:
        residual = 0.0
    return ReflectivityProfile(
        reflectivity=clipped,
        range_mm=range_mm,
        intensity=intensity,
        residual=residual,
        extrapolated=extrapolated,
    )


def isotonic_decreasing(knots: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Keep the ``(force, intensity)`` knots whose intensity strictly decreases.

    Knots are taken in force order; a knot is dropped when its intensity is
    not below the last kept one.
    """
    kept: list[tuple[float, float]] = []
    for force, intensity in sorted(knots):
        if not kept or (force > kept[-1][0] and intensity < kept[-1][1]):
            kept.append((force, intensity))
    return kept


def force_table_from_knots(
    reflectivity: float, knots: Sequence[tuple[float, float]]
) -> ForceTable:
    """Clean ``(force, intensity)`` knots and wrap them in a ``ForceTable``."""
    cleaned = isotonic_decreasing(knots)
    if len(cleaned) < 2:
        raise CalibrationError(
            f"only {len(cleaned)} monotone knot(s) survived cleanup; cannot build a force table"
        )
    return ForceTable(
        reflectivity=reflectivity,
        forces=tuple(f for f, _ in cleaned),
        intensities=tuple(i for _, i in cleaned),
    )


def contact_scene(template: Scene, reflectivity: float, depth: float) -> Scene:
    """``template`` with a target of ``reflectivity`` pressed ``depth`` mm in."""
    return replace(
        template,
        indentation=Indentation(depth),
        target=Target(template.boundary.thickness - depth, reflectivity),
    )


def build_force_table(
    template: Scene,
    reflectivity: float,
    depths: Sequence[float],
    spring: Optional[SpringModel] = None,
) -> ForceTable:
    """Simulate contact readings over ``depths`` and tabulate intensity to force.

    Raises:
        ValueError: If ``depths`` is not strictly increasing from >= 0.
        CalibrationError: If fewer than 2 monotone knots survive.
    """
    depths = list(depths)
    if not depths or depths[0] < 0 or any(b <= a for a, b in zip(depths, depths[1:])):
        raise ValueError("depth grid must be strictly increasing and start at >= 0")
    spring = spring or SpringModel()
    knots = []
    for depth in depths:
        reading = simulate(contact_scene(template, reflectivity, depth))
        knots.append((force_from_depth(spring, depth), reading.intensity))
    return force_table_from_knots(reflectivity, knots)


def infer_force(table: ForceTable, intensity: float) -> ForceEstimate:
    """Invert ``table`` at ``intensity`` by linear interpolation between knots.

    Intensities beyond the table are clamped to the end knots and flagged
    as saturated.
    """
    first, last = table.intensities[0], table.intensities[-1]
    if intensity >= first:
        return ForceEstimate(table.forces[0], intensity > first)
    if intensity <= last:
        return ForceEstimate(table.forces[-1], intensity < last)
    force = np.interp(intensity, table.intensities[::-1], table.forces[::-1])
    return ForceEstimate(float(force), False)
