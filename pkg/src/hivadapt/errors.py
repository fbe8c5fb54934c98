"""Exception hierarchy shared by all modules."""


class HivAdaptError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgument(HivAdaptError, ValueError):
    pass


class SolverError(HivAdaptError):
    """Newton failure in the forward or adjoint recurrence.

    ``step`` is the index of the failing (sub-)step, ``interval`` the mesh
    interval that contains it (None when unknown).
    """

    def __init__(self, msg, step=None, interval=None, trace=None):
        super().__init__(msg)
        self.step = step
        self.interval = interval
        self.trace = trace


class NewtonDivergence(SolverError):
    pass


class SingularJacobian(SolverError):
    pass


class MisfitDomainError(HivAdaptError):
    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class OptimizerError(HivAdaptError):
    """Raised when an iterate cannot be evaluated; carries the offending E."""

    def __init__(self, msg, e=None, level=None):
        super().__init__(msg)
        self.e = e
        self.level = level


class DegenerateDirection(OptimizerError):
    pass


class SchemaError(HivAdaptError, ValueError):
    pass


class ParseError(HivAdaptError, ValueError):
    def __init__(self, msg, line=None):
        super().__init__(msg)
        self.line = line
