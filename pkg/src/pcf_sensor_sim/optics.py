"""Light-interface laws: Snell refraction, Fresnel splitting, Lambertian scattering.

Every law has a scalar form operating on ``Vec2`` and a ``*_batch`` form over
numpy arrays, which the tracer uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constants import AIR_INDEX
from .geometry import Point2, Vec2


@dataclass(frozen=True)
class Medium:
    """Homogeneous optical medium."""

    refractive_index: float = AIR_INDEX

    def __post_init__(self):
        if not self.refractive_index >= 1.0:
            raise ValueError(f"refractive index must be >= 1, got {self.refractive_index}")


@dataclass(frozen=True)
class Ray2:
    """A power-weighted directed ray.

    ``spread`` is the angular half-width of the beam the ray stands for and
    ``width`` its transverse half-width at ``origin``; both default to a
    pencil beam. ``tagged`` is set once the light has scattered off a target.
    """

    origin: Point2
    direction: Vec2
    power: float = 1.0
    optical_path: float = 0.0
    bounce_count: int = 0
    medium_index: float = AIR_INDEX
    spread: float = 0.0
    width: float = 0.0
    tagged: bool = False

    def __post_init__(self):
        if not 0.0 <= self.power <= 1.0:
            raise ValueError(f"ray power must be in [0, 1], got {self.power}")
        if self.optical_path < 0:
            raise ValueError(f"optical path must be >= 0, got {self.optical_path}")
        norm = math.hypot(*self.direction)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit, got norm {norm}")

    def advanced(self, t: float) -> Ray2:
        """Return this ray moved ``t`` mm along its direction."""
        ox, oy = self.origin
        dx, dy = self.direction
        return replace(
            self,
            origin=Point2(ox + t * dx, oy + t * dy),
            optical_path=self.optical_path + t * self.medium_index,
            width=self.width + t * self.spread,
        )


def reflect(incident: Vec2, normal: Vec2) -> Vec2:
    """Mirror ``incident`` about the surface with unit ``normal``."""
    k = 2.0 * (incident[0] * normal[0] + incident[1] * normal[1])
    return Vec2(incident[0] - k * normal[0], incident[1] - k * normal[1])


def refract(incident: Vec2, normal: Vec2, n1: float, n2: float) -> Optional[Vec2]:
    """Snell refraction from index ``n1`` into ``n2``.

    ``normal`` must point against ``incident``. Returns None under total
    internal reflection.

    Example:
        >>> refract(Vec2(0.0, 1.0), Vec2(0.0, -1.0), 1.0, 1.41)
        Point2(x=0.0, y=1.0)
    """
    tx, ty, ok = refract_batch(
        np.array([incident[0]]),
        np.array([incident[1]]),
        np.array([normal[0]]),
        np.array([normal[1]]),
        n1,
        n2,
    )
    if not ok[0]:
        return None
    return Vec2(float(tx[0]), float(ty[0]))


def refract_batch(dx, dy, nx, ny, n1, n2):
    """Vectorized ``refract``; returns ``(tx, ty, transmitted_mask)``."""
    eta = np.asarray(n1, dtype=float) / np.asarray(n2, dtype=float)
    cos_i = np.clip(-(dx * nx + dy * ny), 0.0, 1.0)
    k = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    ok = k >= 0.0
    root = np.sqrt(np.where(ok, k, 0.0))
    tx = eta * dx + (eta * cos_i - root) * nx
    ty = eta * dy + (eta * cos_i - root) * ny
    length = np.hypot(tx, ty)
    length = np.where(length > 0.0, length, 1.0)
    return tx / length, ty / length, ok


def fresnel_batch(cos1, n1, n2):
    """Unpolarized Fresnel reflectance for arrays of incidence cosines.

    Returns ``(R, cos2)``; ``R`` is exactly 1 under total internal reflection,
    where ``cos2`` is 0.
    """
    cos1 = np.clip(np.asarray(cos1, dtype=float), 0.0, 1.0)
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    sin2 = (n1 / n2) * np.sqrt(np.maximum(0.0, 1.0 - cos1 * cos1))
    tir = sin2 >= 1.0
    cos2 = np.sqrt(np.maximum(0.0, 1.0 - sin2 * sin2))
    with np.errstate(divide="ignore", invalid="ignore"):
        rs = (n1 * cos1 - n2 * cos2) / (n1 * cos1 + n2 * cos2)
        rp = (n2 * cos1 - n1 * cos2) / (n2 * cos1 + n1 * cos2)
    R = 0.5 * (rs * rs + rp * rp)
    R = np.where(tir | ~np.isfinite(R), 1.0, R)
    return np.clip(R, 0.0, 1.0), np.where(tir, 0.0, cos2)


def fresnel_unpolarized(cos_theta1: float, n1: float, n2: float) -> tuple[float, float]:
    """Return ``(R, T)`` for unpolarized light; ``T = 1 - R``.

    Example:
        >>> round(fresnel_unpolarized(1.0, 1.0, 1.41)[0], 5)
        0.02894
    """
    if not 0.0 < cos_theta1 <= 1.0:
        raise ValueError(f"cos(theta1) must be in (0, 1], got {cos_theta1}")
    R, _ = fresnel_batch(np.array([cos_theta1]), n1, n2)
    r = float(R[0])
    return r, 1.0 - r


def lambertian_directions(
    fan_size: int, rng: Optional[np.random.Generator] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Scatter angles from the normal and their cosine-law weights.

    Deterministic mode splits [-pi/2, pi/2] into ``fan_size`` equal strata
    sampled at their midpoints, each weighted by the cosine integral over the
    stratum. With ``rng`` the angles are drawn from the cosine law and weighted
    equally. Weights always sum to 1.
    """
    if fan_size < 1:
        raise ValueError(f"fan size must be >= 1, got {fan_size}")
    if rng is not None:
        phi = np.arcsin(2.0 * rng.random(fan_size) - 1.0)
        return phi, np.full(fan_size, 1.0 / fan_size)
    edges = np.linspace(-math.pi / 2, math.pi / 2, fan_size + 1)
    phi = 0.5 * (edges[:-1] + edges[1:])
    weights = 0.5 * (np.sin(edges[1:]) - np.sin(edges[:-1]))
    return phi, weights


def lambertian_scatter(
    hit_point: Point2,
    surface_normal: Vec2,
    incoming_power: float,
    reflectivity: float,
    fan_size: int,
    *,
    optical_path: float = 0.0,
    bounce_count: int = 0,
    medium_index: float = AIR_INDEX,
    rng: Optional[np.random.Generator] = None,
) -> list[Ray2]:
    """Scatter ``incoming_power`` off a Lambertian target into a fan of rays.

    Rays cover the half-plane on the ``surface_normal`` side; their powers sum
    to ``incoming_power * reflectivity``. Returns an empty list for a black
    target.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {reflectivity}")
    if reflectivity == 0.0 or incoming_power == 0.0:
        return []
    phi, weights = lambertian_directions(fan_size, rng)
    nx, ny = surface_normal
    tx, ty = ny, -nx
    spread = math.pi / (2 * fan_size)
    rays = []
    for angle, weight in zip(phi, weights):
        c, s = math.cos(angle), math.sin(angle)
        rays.append(
            Ray2(
                origin=Point2(*hit_point),
                direction=Vec2(c * nx + s * tx, c * ny + s * ty),
                power=incoming_power * reflectivity * float(weight),
                optical_path=optical_path,
                bounce_count=bounce_count,
                medium_index=medium_index,
                spread=spread,
                tagged=True,
            )
        )
    return rays
