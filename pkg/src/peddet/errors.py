"""Exception types shared across the package.

The CLI maps these onto distinct process exit codes, so keep the
hierarchy flat and specific.
"""


class PeddetError(Exception):
    """Base class for all package errors."""


class DimensionError(PeddetError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class DivergenceError(PeddetError, RuntimeError):
    """An iterative procedure produced a non-finite value.

    Carries enough context (iteration / epoch / sample) to locate the
    blow-up; usually signals a step size that is too large.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(PeddetError, ValueError):
    """Invalid or contradictory run configuration."""


class DataError(PeddetError, ValueError):
    """Missing or malformed input data (images, annotations, detections)."""


class CheckpointError(PeddetError, ValueError):
    """Malformed, truncated or incompatible checkpoint file."""
