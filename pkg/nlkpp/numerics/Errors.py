"""
Error types for the numerical layer.

Module errors derive from NlkppError so the app can map them to exit codes
in one place. Numerical failures (non-convergence, blow-up, leaving the
positive cone) derive from NumericalError.
"""


class NlkppError(Exception):
    """Base class for every error raised by the toolkit"""


class KernelError(NlkppError, ValueError):
    """Invalid kernel construction or an operation the kernel does not support"""


class DomainError(KernelError):
    """Argument outside the domain of a kernel operation (e.g. non-finite x)"""


class GridMismatchError(NlkppError, ValueError):
    """Two fields or a field and an operation disagree on the grid"""


class SymmetryError(NlkppError, ValueError):
    """A field expected to be even about x = 0 is not"""

    def __init__(self, asymmetry: float, tol: float):
        super().__init__(f"field is not even: asymmetry {asymmetry:.3e} exceeds {tol:.1e}")
        self.asymmetry = asymmetry
        self.tol = tol


class ResolutionError(NlkppError, ValueError):
    """The grid does not resolve the field or the kernel"""


class StabilityError(NlkppError, ValueError):
    """A stability quantity is requested for a mode where it does not exist"""


class CertificateError(NlkppError, ValueError):
    """The boundedness certificate cannot be applied"""


class FrontError(NlkppError, ValueError):
    """A front cannot be located or a speed cannot be fitted"""


class WraparoundError(NlkppError):
    """A front came too close to the edge of the periodic domain"""


class NumericalError(NlkppError):
    """A numerical procedure failed (convergence, positivity, blow-up)"""


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class PositivityError(NumericalError):
    """An iterate or a time step left the positive cone"""


class ContinuationError(NumericalError):
    def __init__(self, mu: float, cause: Exception):
        super().__init__(f"continuation failed at mu={mu:.10g}: {cause}")
        self.mu = mu


class BlowUpSignal(NumericalError):
    """
    The solution stopped being finite (or crossed a blow-up threshold).

    This is an expected outcome for atomic kernels, so it carries the time of
    failure and the last observed sup-norm instead of only a message.
    """

    def __init__(self, t: float, sup_u: float, message: str = None):
        super().__init__(message or f"blow-up at t={t:.6g} (sup u = {sup_u:.6g})")
        self.t = t
        self.sup_u = sup_u
