"""Exception hierarchy shared by all streamflow modules."""


class StreamflowError(Exception):
    """Base class for every error raised by this package."""


class DomainError(StreamflowError, ValueError):
    """Invalid parameter interval or argument outside its domain."""


class RegularityError(StreamflowError, ValueError):
    """A curve tangent vanishes (or may vanish) on its domain."""


class DimensionError(StreamflowError, ValueError):
    """Mismatched or unsupported spatial dimension."""


class AlignmentError(StreamflowError, ValueError):
    """Tangent alignment is undefined for a zero vector."""


class SampleError(StreamflowError, ValueError):
    """Malformed streamline samples (ragged batch, repeated points, ...)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SolverError(StreamflowError, RuntimeError):
    """Numerical failure while integrating a streamline ODE.

    ``s`` is the parameter value where the failure was detected, ``partial``
    the solution computed up to that point (if any) and ``segment`` the spline
    segment index when raised from a chained solve.
    """

    def __init__(self, message, s=None, partial=None, segment=None):
        super().__init__(message)
        self.s = s
        self.partial = partial
        self.segment = segment

    def __str__(self):
        msg = super().__str__()
        if self.segment is not None:
            msg = f"segment {self.segment}: {msg}"
        return msg


class SingularityError(SolverError):
    """The leading coefficient of the ODE degenerates at ``s``."""


class StepFailureError(SolverError):
    """Newton iteration of an implicit step did not converge."""


class MaxStepsError(SolverError):
    """The requested interval needs more steps than allowed."""


class OrderUndefinedError(SolverError):
    """Convergence order cannot be estimated from zero errors."""


class ConfigError(StreamflowError, ValueError):
    """Invalid run configuration."""


class FormatError(StreamflowError, ValueError):
    """Malformed input file; ``line`` is the 1-based line number when known."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
