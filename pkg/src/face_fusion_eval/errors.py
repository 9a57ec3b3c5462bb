"""Exception hierarchy shared by every module of the toolkit."""

from pathlib import Path
from typing import Optional, Union


class FaceFusionError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FaceFusionError, ValueError):
    """Invalid user input: a file, a flag or a value the tool refuses.

    The CLI maps this class (and its subclasses) to exit code 1.
    """

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        """Initialize the error.

        Args:
            message: Human readable description of the problem.
            path: Optional file the problem was found in.
            line: Optional 1-based line number inside ``path``.
        """
        self.path = Path(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None and line is not None:
            location = f"{self.path}:{line}: "
        elif self.path is not None:
            location = f"{self.path}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(location + message)
        self.message = message


class FormatError(ValidationError):
    """A CSV, binary or OBJ file does not follow its documented format."""


class MeshError(ValidationError):
    """A mesh violates the mesh invariants."""


class FusionError(ValidationError):
    """Score sets cannot be aligned or fused."""


class MetricError(ValidationError):
    """A metric is undefined for the given scores."""


class ConfigError(ValidationError):
    """An experiment or simulation parameter file is invalid."""


class ExperimentError(ValidationError):
    """An experiment cannot run with the inputs it was given."""
