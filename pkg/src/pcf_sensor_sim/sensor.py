"""Sensor forward model: emit, trace, collect, and synthesize device readings.

Tracing runs in waves over a ``RayBatch`` of numpy arrays. Each wave finds
the nearest scene piece for every live ray, resolves the hit by surface class
and hands the spawned children to the next wave. Power is never dropped
silently: every unit of emitted power ends up received, absorbed, escaped or
in the terminated residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .constants import RANGE_NO_SIGNAL, TARGET_HALF_LENGTH_MM
from .elastomer import build_boundary, height_at
from .geometry import Curve2, Point2, Segment2, Vec2, intersect_batch
from .models import (
    BoundaryPiece,
    PhotonRecord,
    Reading,
    RecordTag,
    Scene,
    SensorHead,
    SurfaceClass,
    TraceResult,
)
from .optics import Ray2, fresnel_batch, lambertian_directions, refract_batch

# Length drawn for rays that leave the scene, in segment recordings
ESCAPE_DRAW_MM = 60.0


def medium_half_angle(half_fov: float, medium_index: float) -> float:
    """Cone half-angle inside a medium for a cone of ``half_fov`` specified in air."""
    return math.asin(math.sin(half_fov) / medium_index)


def emit_fan(head: SensorHead, medium_index: float = 1.0) -> list[Ray2]:
    """Emit ``head.fan_size`` rays stratified endpoint-inclusive over the cone.

    Each ray carries ``1/N`` of the power; the fan is symmetric about +y.

    Example:
        >>> head = SensorHead.centered(half_fov_deg=20.0, fan_size=3)
        >>> [round(math.degrees(math.atan2(r.direction.x, r.direction.y))) for r in emit_fan(head)]
        [-20, 0, 20]
    """
    half = medium_half_angle(head.half_fov, medium_index)
    count = head.fan_size
    angles = np.linspace(-half, half, count)
    spread = half / (count - 1)
    return [
        Ray2(
            origin=head.emitter,
            direction=Vec2(math.sin(a), math.cos(a)),
            power=1.0 / count,
            medium_index=medium_index,
            spread=spread,
        )
        for a in angles
    ]


@dataclass
class RayBatch:
    """Structure-of-arrays view of many rays."""

    ox: np.ndarray
    oy: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    power: np.ndarray
    path: np.ndarray
    bounce: np.ndarray
    n: np.ndarray
    spread: np.ndarray
    width: np.ndarray
    tagged: np.ndarray

    @classmethod
    def from_rays(cls, rays: list[Ray2]) -> RayBatch:
        return cls(
            ox=np.array([r.origin[0] for r in rays], dtype=float),
            oy=np.array([r.origin[1] for r in rays], dtype=float),
            dx=np.array([r.direction[0] for r in rays], dtype=float),
            dy=np.array([r.direction[1] for r in rays], dtype=float),
            power=np.array([r.power for r in rays], dtype=float),
            path=np.array([r.optical_path for r in rays], dtype=float),
            bounce=np.array([r.bounce_count for r in rays], dtype=int),
            n=np.array([r.medium_index for r in rays], dtype=float),
            spread=np.array([r.spread for r in rays], dtype=float),
            width=np.array([r.width for r in rays], dtype=float),
            tagged=np.array([r.tagged for r in rays], dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.power)

    def take(self, index) -> RayBatch:
        return RayBatch(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    @classmethod
    def concat(cls, batches: list[RayBatch]) -> Optional[RayBatch]:
        batches = [b for b in batches if len(b)]
        if not batches:
            return None
        return cls(
            **{
                f.name: np.concatenate([getattr(b, f.name) for b in batches])
                for f in fields(cls)
            }
        )


@dataclass(frozen=True)
class ScenePiece:
    curve: Curve2
    surface: SurfaceClass


def _lies_on_target(piece: BoundaryPiece, height: float) -> bool:
    curve = piece.curve
    return (
        isinstance(curve, Segment2)
        and abs(curve.a.y - height) <= 1e-9
        and abs(curve.b.y - height) <= 1e-9
    )


def scene_pieces(scene: Scene) -> list[ScenePiece]:
    """Every surface the tracer can hit, elastomer and housing included.

    A target resting on the boundary replaces the flat part it touches, so
    light meets the target directly inside the elastomer.
    """
    pieces: list[ScenePiece] = []
    config = scene.boundary
    if config.has_elastomer:
        half = config.span / 2
        boundary = build_boundary(config, scene.indentation, scene.head.emitter.x)
        left_top = height_at(boundary, -half)
        right_top = height_at(boundary, half)
        touching = scene.target is not None and (
            scene.target.distance <= boundary.apex_height + 1e-9
        )
        for piece in boundary.pieces:
            if touching and _lies_on_target(piece, scene.target.distance):
                continue
            surface = SurfaceClass.INTERFACE if piece.surface is SurfaceClass.CAP else piece.surface
            pieces.append(ScenePiece(piece.curve, surface))
        pieces.append(
            ScenePiece(Segment2(Point2(-half, 0.0), Point2(-half, left_top)), SurfaceClass.HOUSING)
        )
        pieces.append(
            ScenePiece(Segment2(Point2(half, 0.0), Point2(half, right_top)), SurfaceClass.HOUSING)
        )
        plane_half = half
    else:
        plane_half = TARGET_HALF_LENGTH_MM
    pieces.append(
        ScenePiece(Segment2(Point2(-plane_half, 0.0), Point2(plane_half, 0.0)), SurfaceClass.SENSOR)
    )
    if scene.target is not None:
        height = scene.target.distance
        pieces.append(
            ScenePiece(
                Segment2(
                    Point2(-TARGET_HALF_LENGTH_MM, height), Point2(TARGET_HALF_LENGTH_MM, height)
                ),
                SurfaceClass.TARGET,
            )
        )
    return pieces


def _aperture_fraction(x, half_footprint, center, half_aperture):
    """Fraction of each footprint ``[x - h, x + h]`` inside the aperture."""
    lo = np.maximum(x - half_footprint, center - half_aperture)
    hi = np.minimum(x + half_footprint, center + half_aperture)
    overlap = np.maximum(0.0, hi - lo)
    pencil = half_footprint <= 0.0
    inside = np.abs(x - center) <= half_aperture
    with np.errstate(divide="ignore", invalid="ignore"):
        fraction = np.where(pencil, inside.astype(float), overlap / (2.0 * half_footprint))
    return np.clip(fraction, 0.0, 1.0)


class _Tracer:
    def __init__(self, scene: Scene, record_segments: bool):
        self.scene = scene
        self.pieces = scene_pieces(scene)
        self.n_air = scene.air.refractive_index
        self.n_elastomer = scene.elastomer.refractive_index
        self.rng = (
            np.random.default_rng(scene.scatter_seed) if scene.scatter_seed is not None else None
        )
        self.result = TraceResult(records=[])
        self.segments: Optional[list[np.ndarray]] = [] if record_segments else None
        self.plane: list[tuple[np.ndarray, ...]] = []

    def run(self, batch: Optional[RayBatch]) -> TraceResult:
        batch = self._cull(batch)
        while batch is not None:
            batch = self._cull(self._step(batch))
        result = self.result
        if self.plane:
            result.plane_x = np.concatenate([p[0] for p in self.plane])
            result.plane_power = np.concatenate([p[1] for p in self.plane])
            result.plane_tagged = np.concatenate([p[2] for p in self.plane])
            result.plane_bounces = np.concatenate([p[3] for p in self.plane])
        if self.segments is not None:
            result.segments = (
                np.concatenate(self.segments) if self.segments else np.zeros((0, 5))
            )
        return result

    def _cull(self, batch: Optional[RayBatch]) -> Optional[RayBatch]:
        if batch is None or not len(batch):
            return None
        dead = (batch.power < self.scene.power_floor) | (batch.bounce > self.scene.bounce_cap)
        if dead.any():
            self.result.residual += float(batch.power[dead].sum())
            batch = batch.take(~dead)
        return batch if len(batch) else None

    def _step(self, batch: RayBatch) -> Optional[RayBatch]:
        hits = [intersect_batch(p.curve, batch.ox, batch.oy, batch.dx, batch.dy) for p in self.pieces]
        t_all = np.stack([h[0] for h in hits])
        nearest = np.argmin(t_all, axis=0)
        cols = np.arange(len(batch))
        t = t_all[nearest, cols]
        nx = np.stack([h[1] for h in hits])[nearest, cols]
        ny = np.stack([h[2] for h in hits])[nearest, cols]

        missed = ~np.isfinite(t)
        if missed.any():
            self.result.escaped += float(batch.power[missed].sum())
            self._record_segments(batch, missed, np.full(len(batch), ESCAPE_DRAW_MM))

        live = ~missed
        t = np.where(live, t, 0.0)
        self._record_segments(batch, live, t)
        moved = RayBatch(
            ox=batch.ox + t * batch.dx,
            oy=batch.oy + t * batch.dy,
            dx=batch.dx,
            dy=batch.dy,
            power=batch.power,
            path=batch.path + t * batch.n,
            bounce=batch.bounce,
            n=batch.n,
            spread=batch.spread,
            width=batch.width + t * batch.spread,
            tagged=batch.tagged,
        )

        children: list[RayBatch] = []
        surfaces = np.array([p.surface.value for p in self.pieces])[nearest]
        for surface in SurfaceClass:
            mask = live & (surfaces == surface.value)
            if not mask.any():
                continue
            sub = moved.take(mask)
            snx, sny = nx[mask], ny[mask]
            if surface is SurfaceClass.SENSOR:
                self._collect(sub)
            elif surface is SurfaceClass.TARGET:
                children.append(self._scatter(sub, snx, sny))
            elif surface is SurfaceClass.INTERFACE:
                children.extend(self._split(sub, snx, sny))
            else:
                self.result.absorbed += float(sub.power.sum())
        return RayBatch.concat(children)

    def _record_segments(self, batch: RayBatch, mask: np.ndarray, t: np.ndarray) -> None:
        if self.segments is None or not mask.any():
            return
        self.segments.append(
            np.column_stack(
                [
                    batch.ox[mask],
                    batch.oy[mask],
                    batch.ox[mask] + t[mask] * batch.dx[mask],
                    batch.oy[mask] + t[mask] * batch.dy[mask],
                    batch.power[mask],
                ]
            )
        )

    def _collect(self, rays: RayBatch) -> None:
        head = self.scene.head
        self.plane.append((rays.ox, rays.power, rays.tagged, rays.bounce))
        acceptance = np.cos(np.arcsin(np.sin(head.half_fov) / rays.n))
        cos_in = -rays.dy
        half_footprint = rays.width / np.maximum(cos_in, 1e-12)
        fraction = _aperture_fraction(
            rays.ox, half_footprint, head.receiver.x, head.aperture_half_width
        )
        fraction = np.where(cos_in >= acceptance, fraction, 0.0)
        received = rays.power * fraction
        self.result.received += float(received.sum())
        self.result.absorbed += float((rays.power - received).sum())
        for i in np.flatnonzero(received > 0.0):
            tag = RecordTag.TARGET_RETURN if rays.tagged[i] else RecordTag.BOUNDARY_CROSSTALK
            self.result.records.append(
                PhotonRecord(
                    power=float(received[i]),
                    optical_path=float(rays.path[i]),
                    bounce_count=int(rays.bounce[i]),
                    tag=tag,
                )
            )

    def _scatter(self, rays: RayBatch, nx: np.ndarray, ny: np.ndarray) -> RayBatch:
        rho = self.scene.target.reflectivity
        self.result.absorbed += float(rays.power.sum() * (1.0 - rho))
        fan = self.scene.scatter_fan
        if rho == 0.0:
            return rays.take(np.zeros(len(rays), dtype=bool))
        if self.rng is None:
            phi, weights = lambertian_directions(fan)
            phi = np.broadcast_to(phi, (len(rays), fan))
            weights = np.broadcast_to(weights, (len(rays), fan))
        else:
            phi = np.arcsin(2.0 * self.rng.random((len(rays), fan)) - 1.0)
            weights = np.full((len(rays), fan), 1.0 / fan)
        c, s = np.cos(phi), np.sin(phi)
        # tangent is the normal rotated by -90 degrees
        tx, ty = ny[:, None], -nx[:, None]
        dx = c * nx[:, None] + s * tx
        dy = c * ny[:, None] + s * ty

        def repeat(values):
            return np.repeat(values, fan)

        return RayBatch(
            ox=repeat(rays.ox),
            oy=repeat(rays.oy),
            dx=dx.ravel(),
            dy=dy.ravel(),
            power=(rays.power[:, None] * rho * weights).ravel(),
            path=repeat(rays.path),
            bounce=repeat(rays.bounce + 1),
            n=repeat(rays.n),
            spread=np.full(len(rays) * fan, math.pi / (2 * fan)),
            width=np.zeros(len(rays) * fan),
            tagged=np.ones(len(rays) * fan, dtype=bool),
        )

    def _split(self, rays: RayBatch, nx: np.ndarray, ny: np.ndarray) -> list[RayBatch]:
        n1 = rays.n
        n2 = np.where(np.isclose(n1, self.n_elastomer), self.n_air, self.n_elastomer)
        cos1 = np.clip(-(rays.dx * nx + rays.dy * ny), 1e-12, 1.0)
        R, cos2 = fresnel_batch(cos1, n1, n2)

        k = 2.0 * (rays.dx * nx + rays.dy * ny)
        reflected = RayBatch(
            ox=rays.ox,
            oy=rays.oy,
            dx=rays.dx - k * nx,
            dy=rays.dy - k * ny,
            power=rays.power * R,
            path=rays.path,
            bounce=rays.bounce + 1,
            n=n1,
            spread=rays.spread,
            width=rays.width,
            tagged=rays.tagged,
        )
        tx, ty, _ = refract_batch(rays.dx, rays.dy, nx, ny, n1, n2)
        crosses = R < 1.0
        safe_cos2 = np.maximum(cos2, 1e-12)
        transmitted = RayBatch(
            ox=rays.ox,
            oy=rays.oy,
            dx=tx,
            dy=ty,
            power=rays.power * (1.0 - R),
            path=rays.path,
            bounce=rays.bounce + 1,
            n=n2,
            spread=rays.spread * (n1 * cos1) / (n2 * safe_cos2),
            width=rays.width * safe_cos2 / cos1,
            tagged=rays.tagged,
        ).take(crosses)
        return [reflected, transmitted]


def _initial_batch(scene: Scene, rays: Optional[list[Ray2]]) -> RayBatch:
    if rays is None:
        medium = (
            scene.elastomer.refractive_index
            if scene.boundary.has_elastomer
            else scene.air.refractive_index
        )
        rays = emit_fan(scene.head, medium)
    return RayBatch.from_rays(rays)


def trace(
    scene: Scene, rays: Optional[list[Ray2]] = None, *, record_segments: bool = False
) -> TraceResult:
    """Propagate ``rays`` (default: the head's emitter fan) through ``scene``.

    Interfaces split each ray deterministically into Fresnel-weighted
    reflected and refracted branches, blockers and housing absorb, targets
    scatter a Lambertian fan, and the receiver collects rays arriving inside
    its acceptance cone. Branches stop below ``scene.power_floor`` or past
    ``scene.bounce_cap`` bounces; their power is booked as residual.
    """
    return _Tracer(scene, record_segments).run(_initial_batch(scene, rays))


def synthesize_reading(records: list[PhotonRecord], emitted_power: float = 1.0) -> Reading:
    """Turn receiver records into the device's range and intensity outputs.

    Range is half the power-weighted mean optical path over every record,
    crosstalk included; ``RANGE_NO_SIGNAL`` when nothing arrived.
    """
    total = sum(r.power for r in records)
    if not records or total <= 0.0:
        return Reading(RANGE_NO_SIGNAL, 0.0, 0.0, tuple(records))
    crosstalk = sum(r.power for r in records if r.tag is RecordTag.BOUNDARY_CROSSTALK)
    mean_path = sum(r.power * r.optical_path for r in records) / total
    return Reading(
        range_mm=mean_path / 2.0,
        intensity=min(1.0, total / emitted_power),
        crosstalk=min(1.0, crosstalk / emitted_power),
        records=tuple(records),
    )


def simulate(scene: Scene) -> Reading:
    """Trace the default emitter fan through ``scene`` and return the reading."""
    return synthesize_reading(trace(scene).records)


def snr(reading: Reading) -> float:
    """Target return over boundary crosstalk power; inf when crosstalk is zero."""
    if reading.crosstalk <= 0.0:
        return math.inf if reading.target_return > 0.0 else 0.0
    return reading.target_return / reading.crosstalk


def analytic_view_area(s: float, r: float) -> float:
    """Closed-form view area ``(s/2) * sqrt(4r^2 - s^2)``; 0 once the cones separate."""
    if s <= 0:
        raise ValueError(f"separation must be positive, got {s}")
    if s >= 2 * r:
        return 0.0
    return (s / 2) * math.sqrt(4 * r * r - s * s)


def exact_lens_area(s: float, r: float) -> float:
    """Exact intersection area of two radius-``r`` discs whose centers are ``s`` apart."""
    if s < 0:
        raise ValueError(f"separation must be >= 0, got {s}")
    if s >= 2 * r:
        return 0.0
    return 2 * r * r * math.acos(s / (2 * r)) - (s / 2) * math.sqrt(4 * r * r - s * s)


def area_view_oracle(s: float, r: float, samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo estimate of the two-disc intersection area."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-r, r, samples)
    y = rng.uniform(-r, r, samples)
    inside = (x * x + y * y <= r * r) & ((x - s) ** 2 + y * y <= r * r)
    return float(inside.mean() * 4 * r * r)


def _check_distance(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return d


def analytic_intensity(d, kappa: float, zeta: float, chi: float):
    """Fitted intensity law ``kappa * sqrt(d^2 - zeta^2) / d^2 + chi``.

    The radicand is clamped at zero, so the law returns ``chi`` for
    ``d <= zeta``. Accepts scalars or arrays.

    Example:
        >>> analytic_intensity(5.0, 1.0, 3.0, 0.0)
        0.16
    """
    dd = _check_distance(d)
    value = kappa * np.sqrt(np.maximum(dd * dd - zeta * zeta, 0.0)) / (dd * dd) + chi
    return float(value) if value.ndim == 0 else value


def intensity_jacobian(d, kappa: float, zeta: float, chi: float) -> np.ndarray:
    """Partial derivatives of ``analytic_intensity`` w.r.t. (kappa, zeta, chi).

    Returns an array of shape (len(d), 3). Where the radicand is clamped the
    kappa and zeta columns are zero.
    """
    dd = np.atleast_1d(_check_distance(d))
    radicand = dd * dd - zeta * zeta
    open_ = radicand > 0.0
    root = np.sqrt(np.where(open_, radicand, 1.0))
    d2 = dd * dd
    jac = np.zeros((len(dd), 3))
    jac[:, 0] = np.where(open_, root / d2, 0.0)
    jac[:, 1] = np.where(open_, -kappa * zeta / (root * d2), 0.0)
    jac[:, 2] = 1.0
    return jac
