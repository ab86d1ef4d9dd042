class TiltXError(Exception):
    """Base class for library errors."""


class RangeError(TiltXError, ValueError):
    """A configuration or actuator value lies outside the mechanism's travel."""


class UnreachableTargetError(TiltXError, RuntimeError):
    """Inverse kinematics did not converge.

    ``residual`` is the best position error reached (mm) and ``best`` the
    configuration that achieved it.
    """

    def __init__(self, message: str, residual: float, best=None, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.best = best
        self.iterations = iterations
