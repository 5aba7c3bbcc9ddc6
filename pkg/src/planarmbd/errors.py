"""Exception types shared across the package."""


class SingularMassError(Exception):
    """A (reduced) mass matrix is not positive definite.

    ``pivot`` is the index of the first non-positive Cholesky pivot when
    known, else None.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class AssemblyError(Exception):
    """Position assembly failed to close the constraints.

    Carries the final infinity-norm constraint residual in ``residual``.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class StepDivergenceError(Exception):
    """An implicit step failed to converge or produced a non-finite state.

    ``iterations`` is the number of iterations performed, ``residuals`` a
    dict with the last known constraint/update norms (may be empty).
    """

    def __init__(self, message, iterations=0, residuals=None):
        super().__init__(message)
        self.iterations = iterations
        self.residuals = dict(residuals or {})
