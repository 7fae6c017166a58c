"""Exception hierarchy for pcf-sensor-sim."""


class PcfError(Exception):
    """Base exception for simulator errors."""


class GeometryError(PcfError):
    """Raised when a geometric primitive is degenerate."""


class BoundaryError(PcfError):
    """Raised for an invalid boundary configuration or indentation."""


class SceneError(PcfError):
    """Raised when a scene violates its contact/medium invariants."""


class CalibrationError(PcfError):
    """Raised when a fit or force table cannot be built from the given data."""


class SerializationError(PcfError):
    """Raised when a saved fit or force table cannot be parsed."""


class ConfigError(PcfError):
    """Raised when an experiment config file is malformed."""
