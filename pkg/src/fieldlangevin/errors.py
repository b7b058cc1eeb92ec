"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid scenario configuration (bad value, unknown key, unsupported dimension)."""


class KernelError(RuntimeError):
    """A two-time kernel violates a structural requirement (e.g. indefinite covariance)."""


class CouplingError(ValueError):
    """Requested operation is not defined for this current functional."""


class StiffnessError(RuntimeError):
    """Adaptive ODE integration failed (step-size underflow)."""

    def __init__(self, message, t=None, step=None):
        super().__init__(message)
        self.t = t
        self.step = step


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not converge; carries the residual history."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class ConditioningError(RuntimeError):
    """A linear system is too ill-conditioned to solve reliably."""
