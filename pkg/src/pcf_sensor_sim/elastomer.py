"""Boundary construction, contact deformation and the spring force model.

Indentation is modeled as plane truncation: the undeformed curve is clipped
by the horizontal plane at ``thickness - depth`` and the clipped region is
replaced by a flat cap at that height.
"""

from __future__ import annotations

import math

from .constants import EMITTER_RECEIVER_SEPARATION_MM
from .exceptions import BoundaryError, CalibrationError
from .geometry import Arc2, Curve2, Point2, Segment2
from .models import (
    Boundary,
    BoundaryConfig,
    BoundaryKind,
    BoundaryPiece,
    Indentation,
    SpringModel,
    SurfaceClass,
)


def curve_ends(curve: Curve2) -> tuple[Point2, Point2]:
    """Return the (left, right) endpoints of a boundary curve."""
    if isinstance(curve, Arc2):
        first, second = curve.start_point, curve.end_point
    else:
        first, second = curve.a, curve.b
    return (first, second) if first.x <= second.x else (second, first)


def height_at(boundary: Boundary, x: float) -> float:
    """Height of the interface chain above ``x``; NaN outside the span."""
    for piece in boundary.pieces:
        if piece.surface is SurfaceClass.BLOCKER:
            continue
        left, right = curve_ends(piece.curve)
        if left.x - 1e-9 <= x <= right.x + 1e-9:
            curve = piece.curve
            if isinstance(curve, Arc2):
                dx = x - curve.center.x
                return curve.center.y + math.sqrt(max(0.0, curve.radius**2 - dx * dx))
            return left.y
    return math.nan


def _arc_chain(config: BoundaryConfig, emitter_x: float, cap_height: float):
    half = config.span / 2
    radius = config.radius
    center = Point2(emitter_x, config.thickness - radius)
    reach = max(abs(half - emitter_x), abs(-half - emitter_x))
    if radius <= reach:
        raise BoundaryError(
            f"arc radius {radius} mm cannot span the boundary (needs more than {reach:g} mm)"
        )

    def angle_at(x: float) -> float:
        return math.atan2(math.sqrt(radius**2 - (x - center.x) ** 2), x - center.x)

    left_angle = angle_at(-half)
    right_angle = angle_at(half)
    for side, angle in (("left", left_angle), ("right", right_angle)):
        if center.y + radius * math.sin(angle) <= 0:
            raise BoundaryError(f"arc of radius {radius} mm dips below the sensor plane on the {side}")

    if cap_height >= config.thickness:
        return [BoundaryPiece(Arc2(center, radius, right_angle, left_angle), SurfaceClass.INTERFACE)]

    chord = math.sqrt(max(0.0, radius**2 - (cap_height - center.y) ** 2))
    cap_left = max(center.x - chord, -half)
    cap_right = min(center.x + chord, half)
    pieces = []
    if cap_left > -half:
        pieces.append(
            BoundaryPiece(
                Arc2(center, radius, math.atan2(cap_height - center.y, -chord), left_angle),
                SurfaceClass.INTERFACE,
            )
        )
    pieces.append(
        BoundaryPiece(
            Segment2(Point2(cap_left, cap_height), Point2(cap_right, cap_height)),
            SurfaceClass.CAP,
        )
    )
    if cap_right < half:
        pieces.append(
            BoundaryPiece(
                Arc2(center, radius, right_angle, math.atan2(cap_height - center.y, chord)),
                SurfaceClass.INTERFACE,
            )
        )
    return pieces


def build_boundary(
    config: BoundaryConfig,
    indentation: Indentation,
    emitter_x: float = -EMITTER_RECEIVER_SEPARATION_MM / 2,
) -> Boundary:
    """Build the (possibly indented) boundary for ``config``.

    The interface chain comes first, ordered left to right, followed by the
    blocker wall if any. Arcs are centered one radius below the apex, above
    the emitter, so ``radius == thickness`` puts the emitter at the focus.

    Raises:
        BoundaryError: If the depth reaches the thickness or the arc cannot
            span the boundary above the sensor plane.
    """
    if not config.has_elastomer:
        return Boundary(config, indentation, ())
    depth = indentation.depth
    if depth >= config.thickness:
        raise BoundaryError(
            f"indentation {depth} mm must be below thickness {config.thickness} mm"
        )
    height = config.thickness - depth
    half = config.span / 2
    surface = SurfaceClass.CAP if depth > 0 else SurfaceClass.INTERFACE

    if config.kind is BoundaryKind.ARC:
        pieces = _arc_chain(config, emitter_x, height)
    else:
        pieces = [BoundaryPiece(Segment2(Point2(-half, height), Point2(half, height)), surface)]

    if config.kind is BoundaryKind.BLOCKER:
        top = min(config.blocker_height, height)
        wall = Segment2(Point2(config.blocker_x, 0.0), Point2(config.blocker_x, top))
        pieces.append(BoundaryPiece(wall, SurfaceClass.BLOCKER))

    return Boundary(config, indentation, tuple(pieces))


def force_from_depth(spring: SpringModel, depth: float) -> float:
    """Spring force in newtons, ``k * depth`` clamped at the max force."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    return min(spring.stiffness * depth, spring.max_force)


def depth_from_force(spring: SpringModel, force: float) -> float:
    """Invert ``force_from_depth`` below the clamp.

    Raises:
        CalibrationError: If ``force`` is negative or above the spring's max.
    """
    if force < 0:
        raise CalibrationError(f"force must be >= 0, got {force}")
    if force > spring.max_force:
        raise CalibrationError(
            f"force {force} N exceeds the spring maximum of {spring.max_force} N"
        )
    return force / spring.stiffness
