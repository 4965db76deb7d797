"""Exception hierarchy shared across the toolkit."""


class SceneFlowError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(SceneFlowError):
    """Invalid geometric input (behind-camera point, non-positive depth, ...)."""


class ConfigurationError(SceneFlowError):
    """Invalid generation or pipeline configuration."""


class ContractError(SceneFlowError):
    """Caller violated an operation contract (shape mismatch, bad range, ...)."""


class ParseError(SceneFlowError):
    """Malformed on-disk data; carries location info where available."""


class DataCorruptionError(SceneFlowError):
    """Rendered or derived data violates an internal invariant."""
