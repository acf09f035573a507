"""Exception types raised by the solvers and analysis routines."""


class PtgpeError(Exception):
    """Base class for all package-specific errors."""


class StepUnderflow(PtgpeError):
    """Adaptive integrator cannot satisfy the error tolerance."""


class MissingCompanion(PtgpeError):
    """A mirror-profile companion is required by the active mode but absent."""


class NonDecaying(PtgpeError):
    """Decay constant has non-positive real part; state is not square integrable."""


class NoConvergence(PtgpeError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, iterations, last_norm):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last residual norm {last_norm:.3e})"
        )
        self.iterations = iterations
        self.last_norm = last_norm


class SingularJacobian(PtgpeError):
    """Newton Jacobian is numerically singular (typically near a coalescence)."""


class BranchLost(PtgpeError):
    """Parameter continuation lost its branch (step halving hit minimum step)."""

    def __init__(self, last_good, message=""):
        super().__init__(
            message or f"branch lost; last good parameter value {last_good}"
        )
        self.last_good = last_good


class DegenerateDenominator(PtgpeError):
    """Closed-form eigenvalue denominator vanishes (g = 0 and gamma = 0)."""


class SingularSimilarity(PtgpeError):
    """Similarity matrix is singular at the critical point; use the limit form."""


class NonConvergentLimit(PtgpeError):
    """Entrywise extrapolation of the critical-point matrix did not settle."""


class NoAmplitudeSolution(PtgpeError):
    """No occupation split satisfies the two-mode constraint for the given energy."""


class CardinalityChange(PtgpeError):
    """Spectrum provider returned a different number of branches mid-contour."""


class AmbiguousMatching(PtgpeError):
    """Branch matching stayed ambiguous after maximal contour refinement."""


class FitFailure(PtgpeError):
    """Least-squares fit residual exceeded its acceptance threshold."""
