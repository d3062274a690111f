"""Exception hierarchy shared by every layer of the package."""

from typing import Any, Dict, Optional


class BmdsError(Exception):
    """Base class for all pipeline errors."""


class DimensionError(BmdsError, ValueError):
    """Tensor shapes or axes are incompatible with the requested operation."""


class DomainError(BmdsError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class GraphError(BmdsError, RuntimeError):
    """The autodiff graph was used in a way backward cannot honour."""


class GradCheckError(BmdsError, RuntimeError):
    """A function under gradient check is not deterministic."""


class GenerationError(BmdsError, RuntimeError):
    """Synthetic phantom generation could not satisfy its constraints."""


class ConfigError(BmdsError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if key is not None:
            location = f"{key}"
            if line is not None:
                location += f" (line {line})"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")
        self.key = key
        self.line = line


class MissingConfigError(ConfigError):
    """The config file named on the command line does not exist."""


class FormatError(BmdsError, ValueError):
    """Malformed or incompatible on-disk artifact."""


class ReportError(BmdsError, OSError):
    """A report could not be written."""


class TrainingError(BmdsError, RuntimeError):
    """Training hit a non-finite loss."""

    def __init__(self, message: str, breakdown: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.breakdown = breakdown or {}
