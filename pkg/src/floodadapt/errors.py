"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, configuration or
data errors exit 2, runtime failures exit 3.
"""


class FloodAdaptError(Exception):
    """Base class for all package errors."""


class ValidationError(FloodAdaptError):
    """An object violates a structural invariant (bad table, bad grid, ...)."""


class ParseError(ValidationError):
    """A data file could not be parsed. Carries the offending location."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc += str(path)
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


class ConfigError(FloodAdaptError):
    """A run configuration is inconsistent or incomplete."""


class DomainError(FloodAdaptError):
    """A query lies outside the modelled domain (year, zone, mode, ...)."""


class FeasibilityError(FloodAdaptError):
    """An action violates the current deployment mask."""

    def __init__(self, message: str, zones: list[int] | None = None):
        super().__init__(message)
        self.zones = zones or []


class ProtocolError(FloodAdaptError):
    """An operation was invoked in an illegal state (stepping a done episode)."""


class NumericalError(FloodAdaptError):
    """A computation produced non-finite values."""
