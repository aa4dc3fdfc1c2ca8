"""Exception types shared across the toolkit."""


class RabiStarkError(Exception):
    """Base class for every numerical failure raised by this package."""


class ParameterError(RabiStarkError, ValueError):
    pass


class SolverConvergenceError(RabiStarkError):
    """An eigensolve or a truncation ladder did not converge.

    ``best`` carries whatever partial information was available: the best
    residual for an eigensolve, or the last two values for a truncation ladder.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateGroundStateError(RabiStarkError):
    """Ground state is degenerate, so state-dependent quantities are gauge-undefined."""


class IncompleteSumError(RabiStarkError):
    """Eigenstate sum for the fidelity susceptibility is not converged at the given k."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class OracleDomainError(RabiStarkError, ValueError):
    """Analytic solution requested outside its validity domain."""


class FitError(RabiStarkError, ValueError):
    pass


class CollapseError(RabiStarkError, ValueError):
    pass


class PeakError(RabiStarkError):
    """Peak search failed, typically because the maximum sits on the bracket edge."""
