"""Exception hierarchy shared across the package."""


class EntfreezeError(Exception):
    """Base class for all package errors."""


class InvalidOperatorError(EntfreezeError, ValueError):
    """Malformed Pauli string (duplicate sites, unknown axis, non-finite coefficient)."""


class SiteBoundsError(EntfreezeError, IndexError):
    """A site index falls outside [1, L]."""


class ShapeError(EntfreezeError, ValueError):
    """Array dimensions disagree with the register size."""


class ContractViolation(EntfreezeError, ValueError):
    """A precondition on an argument's mathematical properties failed (e.g. Hermiticity)."""


class ParameterError(EntfreezeError, ValueError):
    """A physical parameter is outside its admissible range."""


class SpecError(EntfreezeError, ValueError):
    """Invalid chain, noise or disorder specification."""


class PhaseClassificationError(EntfreezeError, ValueError):
    """Inputs land in a region the phase classifier cannot label."""


class NumericalIntegrityError(EntfreezeError, ArithmeticError):
    """A state lost trace, Hermiticity or positivity beyond tolerance."""

    def __init__(self, message: str, *, time: float | None = None, diagnostics: dict | None = None):
        super().__init__(message if time is None else f"{message} (t = {time:.6g})")
        self.time = time
        self.diagnostics = diagnostics or {}


class ResourceError(EntfreezeError, MemoryError):
    """Requested register is too large for the dense oracle path."""


class AnalysisInputError(EntfreezeError, ValueError):
    """Empty, inconsistent or incomplete input to a post-processing routine."""


class ComparisonError(AnalysisInputError):
    """Reports or trajectories cannot be compared (different grids, δ, pair sets)."""


class FitError(AnalysisInputError):
    """Least-squares design is rank deficient or otherwise unusable."""


class InfeasibleError(EntfreezeError, ValueError):
    """No solution exists in the physical domain."""
