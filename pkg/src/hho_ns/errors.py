"""Exception hierarchy shared by all modules."""


class HHOError(Exception):
    """Base class for all package errors."""


class InvalidArgument(HHOError, ValueError):
    pass


class InvalidMesh(HHOError, ValueError):
    pass


class MeshParseError(InvalidMesh):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class QuadratureCapabilityError(HHOError):
    pass


class CondensationError(HHOError):
    def __init__(self, message, element=None):
        self.element = element
        super().__init__(message)


class SolverError(HHOError):
    pass


class NewtonDivergedError(SolverError):
    """Raised when the nonlinear iteration stalls; carries the report."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
