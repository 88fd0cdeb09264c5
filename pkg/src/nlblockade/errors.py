class SolverError(RuntimeError):
    """A numerical solve did not meet its contract."""


class TruncationError(SolverError):
    """Population on the top Fock level exceeds the adequacy threshold."""

    def __init__(self, message, top_population=None):
        super().__init__(message)
        self.top_population = top_population


class DegenerateSteadyStateError(SolverError):
    """The Liouvillian kernel is not one-dimensional."""


class StiffnessError(SolverError):
    """Adaptive propagation gave up (step size underflow or too many steps)."""
