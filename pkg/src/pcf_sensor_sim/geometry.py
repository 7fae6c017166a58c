"""2D primitives and exact ray-curve intersection.

The frame is the sensor cross-section: x lateral, y along the emitter axis,
sensor plane at y = 0, one unit per millimeter. Scalar entry points wrap the
vectorized ``*_batch`` functions so both paths share one implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple, Optional, Union

import numpy as np

from .constants import GRAZING_DISCRIMINANT, RAY_EPSILON_MM
from .exceptions import GeometryError

if TYPE_CHECKING:
    from .optics import Ray2

TWO_PI = 2.0 * math.pi


class Point2(NamedTuple):
    """A point (or, as ``Vec2``, a direction) in millimeters."""

    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Point2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point2(self.x - other[0], self.y - other[1])

    def scale(self, k: float) -> Point2:
        return Point2(self.x * k, self.y * k)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def normalized(self) -> Point2:
        length = self.norm()
        if length == 0.0:
            raise GeometryError("cannot normalize a zero vector")
        return Point2(self.x / length, self.y / length)


Vec2 = Point2


def unit(angle: float) -> Vec2:
    """Unit vector at ``angle`` radians from +x."""
    return Vec2(math.cos(angle), math.sin(angle))


@dataclass(frozen=True)
class Segment2:
    """Straight segment between two distinct endpoints."""

    a: Point2
    b: Point2

    def __post_init__(self):
        if self.a == self.b:
            raise GeometryError(f"degenerate segment at {self.a}")

    def sample(self, count: int) -> np.ndarray:
        """Return ``count`` evenly spaced points, endpoints included, shape (count, 2)."""
        u = np.linspace(0.0, 1.0, count)
        return np.column_stack(
            [self.a.x + u * (self.b.x - self.a.x), self.a.y + u * (self.b.y - self.a.y)]
        )


@dataclass(frozen=True)
class Arc2:
    """Circular arc, counter-clockwise from ``start`` to ``end`` radians."""

    center: Point2
    radius: float
    start: float
    end: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"arc radius must be positive, got {self.radius}")
        span = self.end - self.start
        if not 0 < span <= TWO_PI:
            raise GeometryError(f"arc extent must be in (0, 2pi], got {span}")

    @property
    def span(self) -> float:
        return self.end - self.start

    def point_at(self, angle: float) -> Point2:
        return Point2(
            self.center.x + self.radius * math.cos(angle),
            self.center.y + self.radius * math.sin(angle),
        )

    @property
    def start_point(self) -> Point2:
        return self.point_at(self.start)

    @property
    def end_point(self) -> Point2:
        return self.point_at(self.end)

    def contains_angle(self, angle):
        """Vectorized test of whether polar ``angle`` lies within the extent."""
        if self.span >= TWO_PI:
            return np.ones_like(np.asarray(angle, dtype=float), dtype=bool)
        offset = np.mod(np.asarray(angle, dtype=float) - self.start, TWO_PI)
        return offset <= self.span + 1e-12

    def sample(self, count: int) -> np.ndarray:
        """Return ``count`` points along the arc, endpoints included, shape (count, 2)."""
        angles = np.linspace(self.start, self.end, count)
        return np.column_stack(
            [
                self.center.x + self.radius * np.cos(angles),
                self.center.y + self.radius * np.sin(angles),
            ]
        )


Curve2 = Union[Segment2, Arc2]


class Hit(NamedTuple):
    """Nearest intersection along a ray."""

    t: float
    point: Point2
    normal: Vec2


def _orient_against(nx, ny, dx, dy):
    flip = nx * dx + ny * dy > 0.0
    return np.where(flip, -nx, nx), np.where(flip, -ny, ny)


def intersect_segment_batch(ox, oy, dx, dy, seg: Segment2):
    """Intersect K rays with one segment.

    Returns ``(t, nx, ny)`` arrays; ``t`` is ``inf`` where the ray misses.
    Normals are unit and oriented against each incoming ray.
    """
    ex = seg.b.x - seg.a.x
    ey = seg.b.y - seg.a.y
    wx = seg.a.x - ox
    wy = seg.a.y - oy
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (wx * ey - wy * ex) / denom
        u = (wx * dy - wy * dx) / denom
    ok = (np.abs(denom) > 1e-15) & (t > RAY_EPSILON_MM) & (u >= 0.0) & (u <= 1.0)
    t = np.where(ok, t, np.inf)
    length = math.hypot(ex, ey)
    nx = np.full_like(t, -ey / length)
    ny = np.full_like(t, ex / length)
    nx, ny = _orient_against(nx, ny, dx, dy)
    return t, nx, ny


def intersect_arc_batch(ox, oy, dx, dy, arc: Arc2):
    """Intersect K rays with one arc; same contract as ``intersect_segment_batch``.

    Directions must be unit. Grazing rays (discriminant within
    ``GRAZING_DISCRIMINANT`` of zero) miss.
    """
    cx, cy, r = arc.center.x, arc.center.y, arc.radius
    ocx = ox - cx
    ocy = oy - cy
    b = ocx * dx + ocy * dy
    c = ocx * ocx + ocy * ocy - r * r
    disc = b * b - c
    hit = disc > GRAZING_DISCRIMINANT
    root = np.sqrt(np.where(hit, disc, 0.0))
    best = np.full(np.shape(b), np.inf)
    for candidate in (-b - root, -b + root):
        px = ox + candidate * dx
        py = oy + candidate * dy
        inside = arc.contains_angle(np.arctan2(py - cy, px - cx))
        ok = hit & (candidate > RAY_EPSILON_MM) & inside & (candidate < best)
        best = np.where(ok, candidate, best)
    finite = np.isfinite(best)
    tt = np.where(finite, best, 0.0)
    rx = ox + tt * dx - cx
    ry = oy + tt * dy - cy
    length = np.hypot(rx, ry)
    length = np.where(length > 0.0, length, 1.0)
    nx, ny = _orient_against(rx / length, ry / length, dx, dy)
    return best, nx, ny


def intersect_batch(curve: Curve2, ox, oy, dx, dy):
    """Dispatch to the batch intersector for ``curve``."""
    if isinstance(curve, Arc2):
        return intersect_arc_batch(ox, oy, dx, dy, curve)
    return intersect_segment_batch(ox, oy, dx, dy, curve)


def _scalar_hit(ray: Ray2, curve: Curve2) -> Optional[Hit]:
    ox, oy = ray.origin
    dx, dy = ray.direction
    t, nx, ny = intersect_batch(
        curve, np.array([ox]), np.array([oy]), np.array([dx]), np.array([dy])
    )
    if not np.isfinite(t[0]):
        return None
    tt = float(t[0])
    return Hit(tt, Point2(ox + tt * dx, oy + tt * dy), Vec2(float(nx[0]), float(ny[0])))


def intersect_ray_segment(ray: Ray2, seg: Segment2) -> Optional[Hit]:
    """Nearest hit of ``ray`` on ``seg`` beyond the epsilon guard, or None."""
    return _scalar_hit(ray, seg)


def intersect_ray_arc(ray: Ray2, arc: Arc2) -> Optional[Hit]:
    """Nearest hit of ``ray`` on ``arc`` within its angular extent, or None."""
    return _scalar_hit(ray, arc)
