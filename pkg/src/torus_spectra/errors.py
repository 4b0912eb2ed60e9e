"""Exception hierarchy for torus_spectra."""

from typing import Any, Optional


class TorusSpectraError(Exception):
    """Base class for every error raised by the library."""

    pass


class DegenerateLatticeError(TorusSpectraError):
    """Raised when lattice basis vectors are linearly dependent."""

    pass


class DependentVectorsError(TorusSpectraError):
    """Raised when integer vectors expected to be independent are not."""

    pass


class NotSaturatedError(TorusSpectraError):
    """Raised when a submodule is not saturated in Z^d."""

    pass


class ConstantsTooSmallError(TorusSpectraError):
    """Raised when the C_s/D_s schedule does not separate resonances.

    The remedy is to escalate the schedule (see ``PartitionParams.escalated``).
    """

    pass


class NotSelfAdjointError(TorusSpectraError):
    """Raised when a symbol or matrix fails the hermitian symmetry check."""

    pass


class CutoffLeakError(TorusSpectraError):
    """Raised when a homological denominator falls below the cutoff floor."""

    pass


class InsufficientMarginError(TorusSpectraError):
    """Raised when a Fourier box is too small for the requested number of steps."""

    pass


class NothingToReduceError(TorusSpectraError):
    """Raised when dimensional reduction is requested for a trivial or full block."""

    pass


class ParamsInvalidError(TorusSpectraError):
    """Raised when (epsilon, delta, tau) violate the admissibility constraints."""

    pass


class ParamsInvalidForSublatticeError(ParamsInvalidError):
    """Raised when parameters are not admissible on a reduced sub-lattice."""

    pass


class SolverFailureError(TorusSpectraError):
    """Raised when a dense eigensolve fails or misses its accuracy targets."""

    pass


class WindowExhaustedError(TorusSpectraError):
    """Raised when no qualifying spectral gap exists inside the cluster window."""

    pass


class InsufficientDataError(TorusSpectraError):
    """Raised when a regression has too few usable points.

    Attributes:
        exact: True when the data were discarded because every residual is zero
    """

    def __init__(self, message: str, exact: bool = False) -> None:
        super().__init__(message)
        self.exact = exact


class ConfigError(TorusSpectraError):
    """Raised when a run configuration is invalid.

    Attributes:
        diagnostics: Machine-readable list of ``{"field": ..., "message": ...}`` entries
    """

    def __init__(self, message: str, diagnostics: Optional[list[dict[str, Any]]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []
