"""Exception hierarchy shared by the simulator modules."""


class ApcError(Exception):
    """Base class for all simulator errors."""


class ConfigError(ApcError, ValueError):
    """Invalid scenario, geometry or parameter description."""


class IntegrationError(ApcError, ArithmeticError):
    """The ODE integrator left the admissible state space."""


class SolverError(ApcError, ArithmeticError):
    """The PDE stepper aborted (NaN, blow-up or undershoot)."""

    def __init__(self, message, t=None):
        if t is not None:
            message = f"t={t:.6g}: {message}"
        super().__init__(message)
        self.t = t
