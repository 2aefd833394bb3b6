"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class PriorLassoError(Exception):
    exit_code = 5


class DataError(PriorLassoError, ValueError):
    exit_code = 3


class ConstraintSyntaxError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleConstraints(PriorLassoError):
    exit_code = 4


class SolverError(PriorLassoError):
    exit_code = 5


class QpFailure(SolverError):
    pass


class LinearizationStalled(SolverError):
    pass


class TuningFailed(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class SeparationDetected(SolverError):
    pass


class NoFeasiblePoint(PriorLassoError):
    """Raised by the brute-force oracle when no grid point is feasible."""

    exit_code = 4
