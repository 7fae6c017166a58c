"""SVG ray diagrams of a traced scene.

One user unit is one millimeter. Layers are drawn with ``scale(1, -1)`` so
the sensor frame's +y points up on the page.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
import svgwrite

from .geometry import Arc2, Curve2
from .models import Scene, SurfaceClass, TraceResult
from .sensor import scene_pieces, trace

EMITTER_COLOR = "red"
RECEIVER_COLOR = "blue"
BOUNDARY_COLOR = "black"
BLOCKER_COLOR = "saddlebrown"
TARGET_COLOR = "green"
HOUSING_COLOR = "dimgray"
RAY_COLOR = "orange"
GRID_COLOR = "#dddddd"

# Rays dimmer than this fraction of the brightest are left out
MIN_OPACITY = 0.005
ARC_SAMPLES = 96
MARGIN_MM = 2.0


def _r(value: float) -> float:
    """Round for stable, compact output; also folds -0.0 into 0.0."""
    return round(float(value), 4) + 0.0


def _viewbox(scene: Scene) -> tuple[float, float, float, float]:
    """(min_x, min_y, width, height) in the y-up sensor frame."""
    if scene.boundary.has_elastomer:
        half = scene.boundary.span / 2 + MARGIN_MM
        top = scene.boundary.thickness
    else:
        half = 10.0 + MARGIN_MM
        top = 10.0
    if scene.target is not None:
        top = max(top, scene.target.distance)
        if not scene.boundary.has_elastomer:
            half = max(half, scene.target.distance * math.tan(scene.head.half_fov) + 5.0)
    half = math.ceil(half)
    top = math.ceil(top + MARGIN_MM)
    return (-half, -MARGIN_MM, 2 * half, top + MARGIN_MM)


class RayDiagram:
    """Builds the diagram in four layers: grid, scene, rays, head."""

    def __init__(self, scene: Scene, pixels_per_mm: float = 20.0):
        self.scene = scene
        min_x, min_y, width, height = _viewbox(scene)
        self.viewbox = (min_x, min_y, width, height)
        self.dwg = svgwrite.Drawing(
            size=(f"{_r(width * pixels_per_mm)}px", f"{_r(height * pixels_per_mm)}px"),
            profile="full",
        )
        # flip the y-up box into svg's y-down user space
        self.dwg.viewbox(min_x, -(min_y + height), width, height)
        self.dwg.add(
            self.dwg.rect(insert=(min_x, -(min_y + height)), size=(width, height), fill="white")
        )
        self.grid = self.dwg.add(self.dwg.g(id="grid", transform="scale(1, -1)"))
        self.objects = self.dwg.add(self.dwg.g(id="scene", transform="scale(1, -1)"))
        self.rays = self.dwg.add(self.dwg.g(id="rays", transform="scale(1, -1)"))
        self.head = self.dwg.add(self.dwg.g(id="head", transform="scale(1, -1)"))

    def draw_grid(self) -> None:
        min_x, min_y, width, height = self.viewbox
        x0, y0 = math.floor(min_x), math.floor(min_y)
        for x in range(x0, math.ceil(min_x + width) + 1):
            self.grid.add(
                self.dwg.line((x, min_y), (x, min_y + height), stroke=GRID_COLOR, stroke_width=0.02)
            )
        for y in range(y0, math.ceil(min_y + height) + 1):
            self.grid.add(
                self.dwg.line((min_x, y), (min_x + width, y), stroke=GRID_COLOR, stroke_width=0.02)
            )

    def _curve(self, curve: Curve2, color: str, width: float, surface: str) -> None:
        if isinstance(curve, Arc2):
            points = [(_r(x), _r(y)) for x, y in curve.sample(ARC_SAMPLES)]
            element = self.dwg.polyline(points, stroke=color, stroke_width=width, fill="none")
        else:
            element = self.dwg.line(
                (_r(curve.a.x), _r(curve.a.y)),
                (_r(curve.b.x), _r(curve.b.y)),
                stroke=color,
                stroke_width=width,
            )
        element["class"] = surface
        self.objects.add(element)

    def draw_scene(self) -> None:
        min_x, _, width, _ = self.viewbox
        colors = {
            SurfaceClass.INTERFACE: BOUNDARY_COLOR,
            SurfaceClass.BLOCKER: BLOCKER_COLOR,
            SurfaceClass.HOUSING: HOUSING_COLOR,
            SurfaceClass.SENSOR: HOUSING_COLOR,
            SurfaceClass.TARGET: TARGET_COLOR,
        }
        for piece in scene_pieces(self.scene):
            curve = piece.curve
            if piece.surface in (SurfaceClass.TARGET, SurfaceClass.SENSOR):
                # long planes are clipped to the visible box
                curve = type(curve)(
                    curve.a._replace(x=max(curve.a.x, min_x)),
                    curve.b._replace(x=min(curve.b.x, min_x + width)),
                )
            self._curve(curve, colors[piece.surface], 0.12, piece.surface.value)

    def draw_head(self) -> None:
        head = self.scene.head
        half = head.aperture_half_width
        for point, color, name in (
            (head.emitter, EMITTER_COLOR, "emitter"),
            (head.receiver, RECEIVER_COLOR, "receiver"),
        ):
            element = self.dwg.line(
                (_r(point.x - half), _r(point.y)),
                (_r(point.x + half), _r(point.y)),
                stroke=color,
                stroke_width=0.3,
            )
            element["class"] = name
            self.head.add(element)

    def draw_rays(self, segments: np.ndarray) -> int:
        """Draw ``(x0, y0, x1, y1, power)`` rows; returns how many were drawn."""
        if not len(segments):
            return 0
        brightest = float(segments[:, 4].max())
        if brightest <= 0.0:
            return 0
        drawn = 0
        for x0, y0, x1, y1, power in segments:
            opacity = float(power) / brightest
            if opacity < MIN_OPACITY:
                continue
            element = self.dwg.line(
                (_r(x0), _r(y0)),
                (_r(x1), _r(y1)),
                stroke=RAY_COLOR,
                stroke_width=0.04,
                stroke_opacity=_r(opacity),
            )
            element["class"] = "ray"
            self.rays.add(element)
            drawn += 1
        return drawn

    def tostring(self) -> str:
        return self.dwg.tostring()


def render_ray_diagram(
    scene: Scene,
    output: Optional[Union[str, Path]] = None,
    result: Optional[TraceResult] = None,
) -> str:
    """Trace ``scene`` (unless ``result`` is given) and render it as SVG.

    Returns the SVG text; also writes it to ``output`` when a path is given.
    """
    if result is None or result.segments is None:
        result = trace(scene, record_segments=True)
    diagram = RayDiagram(scene)
    diagram.draw_grid()
    diagram.draw_scene()
    diagram.draw_rays(result.segments)
    diagram.draw_head()
    text = diagram.tostring()
    if output is not None:
        Path(output).write_text(text, encoding="utf-8")
    return text
