"""Exception types shared by the solvers."""


class InvalidProblem(ValueError):
    """Problem data violates a structural precondition (bounds, weights, shapes)."""


class Infeasible(ValueError):
    """The constraint set is empty."""


class NoConvergence(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``residual`` carries the last measured optimality residual.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(RuntimeError):
    """A solver produced a non-finite objective value."""
