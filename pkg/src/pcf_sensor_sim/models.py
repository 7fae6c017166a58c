"""Shared types for pcf-sensor-sim."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .constants import (
    BLOCKER_CLEARANCE_MM,
    BOUNCE_CAP,
    BOUNDARY_SPAN_MM,
    EMITTER_RAYS,
    EMITTER_RECEIVER_SEPARATION_MM,
    HALF_FOV_DEG,
    PDMS_INDEX,
    POWER_FLOOR,
    RANGE_NO_SIGNAL,
    RECEIVER_APERTURE_HALF_WIDTH_MM,
    SCATTER_RAYS,
    SPRING_MAX_FORCE_N,
    SPRING_STIFFNESS_N_PER_MM,
)
from .exceptions import BoundaryError, SceneError
from .geometry import Curve2, Point2
from .optics import Medium


class BoundaryKind(str, Enum):
    """Elastomer boundary configuration."""

    BARE = "bare"
    FLAT = "flat"
    BLOCKER = "blocker"
    ARC = "arc"


class SurfaceClass(str, Enum):
    """What happens to light hitting a scene piece."""

    INTERFACE = "interface"
    # Flattened contact region of an indented boundary
    CAP = "cap"
    BLOCKER = "blocker"
    HOUSING = "housing"
    SENSOR = "sensor"
    TARGET = "target"


class RecordTag(str, Enum):
    BOUNDARY_CROSSTALK = "boundary_crosstalk"
    TARGET_RETURN = "target_return"


@dataclass(frozen=True)
class BoundaryConfig:
    """Elastomer boundary geometry.

    ``thickness`` is the height of the undeformed boundary apex above the
    sensor plane. ``blocker_height`` defaults to ``thickness`` minus the
    blocker clearance.
    """

    kind: BoundaryKind
    thickness: float = 0.0
    radius: Optional[float] = None
    blocker_height: Optional[float] = None
    blocker_x: float = 0.0
    span: float = BOUNDARY_SPAN_MM

    def __post_init__(self):
        object.__setattr__(self, "kind", BoundaryKind(self.kind))
        if self.kind is BoundaryKind.BARE:
            return
        if not self.thickness > 0:
            raise BoundaryError(f"thickness must be positive, got {self.thickness}")
        if not self.span > 0:
            raise BoundaryError(f"boundary span must be positive, got {self.span}")
        if self.kind is BoundaryKind.ARC:
            if self.radius is None or not self.radius > 0:
                raise BoundaryError(f"arc radius must be positive, got {self.radius}")
        if self.kind is BoundaryKind.BLOCKER:
            if self.blocker_height is None:
                object.__setattr__(self, "blocker_height", self.thickness - BLOCKER_CLEARANCE_MM)
            if not 0 < self.blocker_height < self.thickness:
                raise BoundaryError(
                    f"blocker height must be in (0, {self.thickness}), got {self.blocker_height}"
                )
            if abs(self.blocker_x) >= self.span / 2:
                raise BoundaryError(f"blocker x-position {self.blocker_x} outside the boundary")

    @property
    def has_elastomer(self) -> bool:
        return self.kind is not BoundaryKind.BARE

    @classmethod
    def bare(cls) -> BoundaryConfig:
        return cls(BoundaryKind.BARE)

    @classmethod
    def flat(cls, thickness: float, **kwargs) -> BoundaryConfig:
        return cls(BoundaryKind.FLAT, thickness, **kwargs)

    @classmethod
    def arc(cls, radius: float, thickness: float, **kwargs) -> BoundaryConfig:
        return cls(BoundaryKind.ARC, thickness, radius=radius, **kwargs)

    @classmethod
    def blocker(cls, thickness: float, **kwargs) -> BoundaryConfig:
        return cls(BoundaryKind.BLOCKER, thickness, **kwargs)


@dataclass(frozen=True)
class Indentation:
    """Flat rigid indenter pressed ``depth`` mm into the boundary."""

    depth: float = 0.0

    def __post_init__(self):
        if not self.depth >= 0:
            raise BoundaryError(f"indentation depth must be >= 0, got {self.depth}")


@dataclass(frozen=True)
class SpringModel:
    stiffness: float = SPRING_STIFFNESS_N_PER_MM
    max_force: float = SPRING_MAX_FORCE_N

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ValueError(f"spring stiffness must be positive, got {self.stiffness}")
        if not self.max_force > 0:
            raise ValueError(f"spring max force must be positive, got {self.max_force}")


@dataclass(frozen=True)
class BoundaryPiece:
    curve: Curve2
    surface: SurfaceClass


@dataclass(frozen=True)
class Boundary:
    """Ordered boundary pieces, left to right, for one config and indentation."""

    config: BoundaryConfig
    indentation: Indentation
    pieces: tuple[BoundaryPiece, ...]

    @property
    def apex_height(self) -> float:
        return self.config.thickness - self.indentation.depth


@dataclass(frozen=True)
class SensorHead:
    """Emitter/receiver pair on the sensor plane.

    ``half_fov`` is the shared emission/acceptance half-angle in radians,
    measured in air.
    """

    emitter: Point2
    receiver: Point2
    half_fov: float
    fan_size: int = EMITTER_RAYS
    aperture_half_width: float = RECEIVER_APERTURE_HALF_WIDTH_MM

    def __post_init__(self):
        if not self.separation > 0:
            raise ValueError("emitter and receiver must be separated")
        if not 0 < self.half_fov < math.pi / 2:
            raise ValueError(f"half field-of-view must be in (0, pi/2), got {self.half_fov}")
        if self.fan_size < 3:
            raise ValueError(f"emitter fan needs at least 3 rays, got {self.fan_size}")
        if not self.aperture_half_width > 0:
            raise ValueError("receiver aperture must have positive width")

    @property
    def separation(self) -> float:
        return math.hypot(self.receiver.x - self.emitter.x, self.receiver.y - self.emitter.y)

    @classmethod
    def centered(
        cls,
        separation: float = EMITTER_RECEIVER_SEPARATION_MM,
        half_fov_deg: float = HALF_FOV_DEG,
        fan_size: int = EMITTER_RAYS,
        aperture_half_width: float = RECEIVER_APERTURE_HALF_WIDTH_MM,
    ) -> SensorHead:
        """Emitter at x = -s/2 and receiver at x = +s/2 on the sensor plane."""
        return cls(
            emitter=Point2(-separation / 2, 0.0),
            receiver=Point2(separation / 2, 0.0),
            half_fov=math.radians(half_fov_deg),
            fan_size=fan_size,
            aperture_half_width=aperture_half_width,
        )


@dataclass(frozen=True)
class Target:
    """Flat Lambertian target parallel to the sensor plane."""

    distance: float
    reflectivity: float

    def __post_init__(self):
        if not self.distance > 0:
            raise SceneError(f"target distance must be positive, got {self.distance}")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise SceneError(f"reflectivity must be in [0, 1], got {self.reflectivity}")


@dataclass(frozen=True)
class Scene:
    """Everything the tracer needs for one reading.

    With ``indentation.depth > 0`` the target is in contact and must sit at
    ``thickness - depth``. ``scatter_seed`` switches Lambertian scattering to
    seeded Monte Carlo.
    """

    head: SensorHead
    boundary: BoundaryConfig
    indentation: Indentation = field(default_factory=Indentation)
    target: Optional[Target] = None
    air: Medium = field(default_factory=Medium)
    elastomer: Medium = field(default_factory=lambda: Medium(PDMS_INDEX))
    scatter_fan: int = SCATTER_RAYS
    power_floor: float = POWER_FLOOR
    bounce_cap: int = BOUNCE_CAP
    scatter_seed: Optional[int] = None

    def __post_init__(self):
        depth = self.indentation.depth
        if self.scatter_fan < 1:
            raise SceneError(f"scatter fan must be >= 1, got {self.scatter_fan}")
        if not self.boundary.has_elastomer:
            if depth > 0:
                raise SceneError("a bare sensor cannot be indented")
            return
        if depth >= self.boundary.thickness:
            raise BoundaryError(
                f"indentation {depth} mm must be below thickness {self.boundary.thickness} mm"
            )
        if depth > 0:
            expected = self.boundary.thickness - depth
            if self.target is None or abs(self.target.distance - expected) > 1e-9:
                raise SceneError(f"indented scene needs the target in contact at {expected} mm")
        elif self.target is not None and self.target.distance < self.boundary.thickness - 1e-9:
            raise SceneError(
                f"target at {self.target.distance} mm is inside the undeformed elastomer"
            )

    @property
    def in_contact(self) -> bool:
        return self.indentation.depth > 0

    @classmethod
    def contact(
        cls, head: SensorHead, boundary: BoundaryConfig, depth: float, reflectivity: float, **kwargs
    ) -> Scene:
        """Scene with the target pressed ``depth`` mm into the boundary."""
        return cls(
            head=head,
            boundary=boundary,
            indentation=Indentation(depth),
            target=Target(boundary.thickness - depth, reflectivity),
            **kwargs,
        )


@dataclass(frozen=True)
class PhotonRecord:
    """Light collected by the receiver from one ray."""

    power: float
    optical_path: float
    bounce_count: int
    tag: RecordTag


@dataclass(frozen=True)
class Reading:
    """The two device outputs plus their provenance."""

    range_mm: float
    intensity: float
    crosstalk: float
    records: tuple[PhotonRecord, ...] = ()

    @property
    def has_signal(self) -> bool:
        return self.range_mm != RANGE_NO_SIGNAL

    @property
    def target_return(self) -> float:
        return max(0.0, self.intensity - self.crosstalk)


@dataclass
class TraceResult:
    """Receiver records plus the full power ledger of one trace.

    ``plane_*`` arrays describe every ray that reached the sensor plane,
    received or not, for landing-point diagnostics. ``segments`` holds
    ``(x0, y0, x1, y1, power)`` rows when recording was requested.
    """

    records: list[PhotonRecord]
    received: float = 0.0
    absorbed: float = 0.0
    escaped: float = 0.0
    residual: float = 0.0
    plane_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    plane_power: np.ndarray = field(default_factory=lambda: np.zeros(0))
    plane_tagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    plane_bounces: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    segments: Optional[np.ndarray] = None

    @property
    def ledger_total(self) -> float:
        return self.received + self.absorbed + self.escaped + self.residual
