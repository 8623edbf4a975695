"""Exception types raised across the package."""


class PhaseIltError(Exception):
    """Base class for all package errors."""


class ValidationError(PhaseIltError, ValueError):
    """Invalid user input (configuration, geometry, file contents)."""


class NumericalError(PhaseIltError, RuntimeError):
    """A numerical procedure failed or produced an unusable value."""


class CapacityExceeded(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class DegenerateTarget(ValidationError):
    pass


class GeometryOverflow(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class DimensionMismatch(ValidationError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NonFiniteObjective(NumericalError):
    pass
