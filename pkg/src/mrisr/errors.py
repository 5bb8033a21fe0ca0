"""Exception hierarchy for the mrisr package."""


class MRISRError(Exception):
    """Base class for all package-specific errors."""


class UnknownMethodError(MRISRError, KeyError):
    """Requested method or problem name is not in the registry."""


class DegenerateAbscissaeError(MRISRError):
    """Coincident abscissae appear in a denominator of a generator formula."""


class PreconditionError(MRISRError):
    """A documented operation precondition was violated."""


class DegenerateEmbeddingError(MRISRError):
    """Embedding residual vector vanishes where a nonzero norm is required."""


class SingularMatrixError(MRISRError):
    """LU factorization hit an exactly singular matrix."""


class NewtonFailure(MRISRError):
    """Newton iteration exceeded its iteration budget or diverged."""


class FastSolveDivergence(MRISRError):
    """Fast inner integration produced a non-finite state."""


class StageSolveFailure(MRISRError):
    """Implicit stage correction failed to converge.

    Carries the failing stage index (1-based) when known.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class StepFailure(MRISRError):
    """A slow step could not be completed; carries the failing stage index."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class StepSizeUnderflow(MRISRError):
    """Adaptive controller pushed H below its minimum."""


class OscillationError(MRISRError):
    """Adaptive run stuck alternating between accepted and rejected steps."""


class ReferenceFailure(MRISRError):
    """Reference-solution convergence gate unmet at the smallest allowed H."""
