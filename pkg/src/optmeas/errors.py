"""Exception hierarchy shared by all modules."""


class OptmeasError(Exception):
    """Base class for every error raised by the package."""


class InvalidStateError(OptmeasError, ValueError):
    """A Bloch vector or density matrix is not physical."""


class SizeLimitError(OptmeasError, ValueError):
    """The requested copy count exceeds the configured cap."""


class PriorError(OptmeasError, ValueError):
    """A prior description is malformed or not normalized."""


class DesignError(OptmeasError, ValueError):
    """A direction set request is infeasible or unsupported."""


class ConvergenceError(OptmeasError, RuntimeError):
    """An iterative procedure failed to reach its tolerance."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class PovmError(OptmeasError, ValueError):
    """A POVM cannot be built or fails its identity check."""


class QuadratureError(ConvergenceError):
    """Node doubling did not stabilise a quadrature result."""
