"""Exception types shared across the library.

Exit-code mapping for the CLI lives in `cli.py`: configuration errors
exit 2, numerical errors 3, batch-quality errors 4.
"""


class ContamDPError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ContamDPError):
    """Invalid hyperparameters, malformed config files, empty grids."""


class DomainError(ContamDPError):
    """An observation or parameter lies outside its declared domain."""


class SamplerError(ContamDPError):
    """Rejection sampling exhausted its retry budget."""


class NonConvergenceError(ContamDPError):
    """Optimizer hit its iteration cap before meeting the gradient test."""

    def __init__(self, message, last_iterate=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class CurvatureError(ContamDPError):
    """Hessian not positive definite even after the jitter ladder."""


class DegeneracyError(ContamDPError):
    """Importance weights collapsed (all-zero after reweighting)."""


class NumericalError(ContamDPError):
    """Quadrature failed to converge or an optimization escalated."""


class BatchQualityError(ContamDPError):
    """Too many invalid repeats in an estimation batch."""
