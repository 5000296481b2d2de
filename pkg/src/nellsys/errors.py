"""Exception hierarchy shared across the package."""


class NellsysError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(NellsysError):
    """A configuration value is outside its allowed range."""


class GridMismatchError(NellsysError):
    """A field was combined with a grid it does not live on."""


class PointOutsideDomainError(NellsysError):
    """Point evaluation was requested outside the closed domain."""


class ParseError(NellsysError):
    """Expression text could not be parsed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class EvaluationError(NellsysError):
    """Expression evaluation hit an unbound variable or a domain violation."""

    def __init__(self, message: str, position: int = -1):
        text = f"{message} (at position {position})" if position >= 0 else message
        super().__init__(text)
        self.message = message
        self.position = position


class ValidationError(NellsysError):
    """Operator or boundary data violates a structural condition.

    ``condition`` names the violated condition (e.g. "strong uniform
    ellipticity") so callers can report exactly what failed.
    """

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition

    @property
    def detail(self) -> str:
        return self.args[0]


class SchemaError(NellsysError):
    """A problem document does not conform to the document schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class AssemblyError(NellsysError):
    """Discrete operator assembly produced an unusable system."""


class NumericError(NellsysError):
    """A numerical computation failed (NaN, singular system, solver failure)."""


class NonConvergenceError(NumericError):
    """An iteration exhausted its budget before reaching tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
