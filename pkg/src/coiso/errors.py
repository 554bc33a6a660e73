"""Exception types shared across the package."""


class CoisoError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(CoisoError):
    """Operands live in phase spaces of different dimension."""


class NonConvergence(CoisoError):
    """An iterative solve exhausted its iteration budget.

    Carries the final residual max-norm so callers can report how far
    from a root the iteration ended up.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularJacobian(CoisoError):
    """The Newton Jacobian is numerically singular.

    For the launch solve this is the symptom of a failing nondegeneracy
    assumption; see `coiso.constraints.nondegeneracy_matrix`.
    """


class SpuriousSolution(CoisoError):
    """Newton converged to a root on a different fiber component."""


class StepFailed(CoisoError):
    """A trajectory aborted; carries the failing step index and cause."""

    def __init__(self, index, cause):
        super().__init__(f"step {index} failed: {cause}")
        self.index = index
        self.cause = cause
