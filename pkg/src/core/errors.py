"""
Error hierarchy shared by every stage of the reduction pipeline.

Each class carries the process exit code the CLI reports for it.
"""


class LQGBTError(Exception):
    """Base class for all errors raised by this package."""
    exit_code: int = 1


class InputError(LQGBTError, ValueError):
    """Inconsistent dimensions, invalid parameters or malformed files."""
    exit_code = 2


class CapacityError(LQGBTError):
    """Problem exceeds the dense-matrix budget."""
    exit_code = 2


class PreconditionError(LQGBTError):
    """A mathematical prerequisite (stability, observability, ...) is violated."""
    exit_code = 2


class UnsupportedError(LQGBTError):
    """Requested combination of options has no defined meaning."""
    exit_code = 2


class OrderSelectionError(LQGBTError):
    """Truncation order violates the singular-value gap condition."""
    exit_code = 3

    def __init__(self, message: str, suggestion: int | None = None):
        super().__init__(message)
        self.suggestion = suggestion


class NonConvergenceError(LQGBTError):
    """An iterative solver stopped without meeting its tolerance."""
    exit_code = 4

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class ExternalSolverPending(NonConvergenceError):
    """LMI data was exported; an external SDP solution has to be supplied."""

    def __init__(self, message: str, export_dir=None):
        super().__init__(message)
        self.export_dir = export_dir


class NumericalError(LQGBTError, ArithmeticError):
    """Factorization or eigensolver breakdown."""
    exit_code = 4


class StepSizeError(NumericalError):
    """Time step too large for the implicit scheme or the PSD check."""


class AccuracyError(NumericalError):
    """A quadrature or discretization self-check failed."""


class CertificateError(LQGBTError):
    """A theorem-level certificate did not pass."""
    exit_code = 5
