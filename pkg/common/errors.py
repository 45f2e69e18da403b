"""Root error type and the categories the command line maps to exit codes."""

from typing import ClassVar


class SspFusionError(Exception):
    """Base class for every error raised by this project.

    ``category`` groups errors for the command line: ``config``,
    ``missing-artifact``, ``input`` or ``stage``.
    """

    category: ClassVar[str] = "stage"


class ConfigError(SspFusionError):
    """Raised when a configuration value is missing or invalid."""

    category: ClassVar[str] = "config"


class MissingArtifactError(SspFusionError):
    """Raised when an upstream artifact a command depends on is absent."""

    category: ClassVar[str] = "missing-artifact"

    def __init__(self, artifact: str, path: str = "") -> None:
        """Initialise with the logical artifact name and the path looked up."""
        self.artifact: str = artifact
        self.path: str = path
        detail = f" ({path})" if path else ""
        super().__init__(f"missing artifact: {artifact}{detail}")


class InputDataError(SspFusionError):
    """Raised when user-supplied data violates its documented contract."""

    category: ClassVar[str] = "input"


class ContainerFormatError(InputDataError):
    """Raised when a container file header or payload is malformed."""
