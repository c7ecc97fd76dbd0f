"""Domain exceptions for nsi3d.

Every error carries the module that raised it so the CLI can print a
module-qualified message and pick the exit code.
"""

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_COMPUTE_ERROR = 3


class Nsi3dError(Exception):
    """Base class for all nsi3d errors."""

    module = "nsi3d"
    exit_code = EXIT_COMPUTE_ERROR

    def __init__(self, message: str, module: str | None = None):
        if module is not None:
            self.module = module
        self.message = message
        super().__init__(message)

    def qualified(self) -> str:
        """Return the message prefixed with the module that raised it."""
        return f"{self.module}: {self.message}"


class ConfigurationError(Nsi3dError):
    """Raised when a geometry, preset or experiment configuration is invalid."""

    module = "config"
    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, field: str | None = None, value: object = None,
                 module: str | None = None):
        self.field = field
        self.value = value
        if field is not None:
            message = f"{message} ({field}={value!r})"
        super().__init__(message, module=module)


class ComputeError(Nsi3dError):
    """Raised when a compute stage cannot produce its result."""

    exit_code = EXIT_COMPUTE_ERROR


class GeometryError(ComputeError):
    """Raised for invalid element indices or geometry lookups."""

    module = "array_geometry"


class ApertureError(ComputeError):
    """Raised when an aperture mask or apodization set cannot be formed."""

    module = "aperture_design"


class SequenceError(ComputeError):
    """Raised when a transmit/receive plan cannot be built or accounted."""

    module = "tx_sequence"


class SimulationError(ComputeError):
    """Raised when a phantom or acquisition cannot be simulated."""

    module = "forward_sim"


class BeamformError(ComputeError):
    """Raised when a volume cannot be reconstructed."""

    module = "beamform"


class MetricError(ComputeError):
    """Raised when an image-quality metric is undefined for its input."""

    module = "metrics"

    def __init__(self, metric: str, reason: str):
        self.metric = metric
        self.reason = reason
        super().__init__(f"{metric}: {reason}")
