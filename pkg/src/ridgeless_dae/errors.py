"""Exception types raised by the solvers and oracles."""


class RidgelessError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(RidgelessError, ValueError):
    """Invalid solver or experiment configuration."""


class ModelDomainError(RidgelessError, ArithmeticError):
    """A model map returned a non-finite value.

    ``point`` and ``equation`` locate the offending grid index and the
    position in the stacked residual, when known.
    """

    def __init__(self, message, point=None, equation=None):
        super().__init__(message)
        self.point = point
        self.equation = equation


class NonConvergence(RidgelessError):
    """The optimizer stopped before reaching the residual tolerance.

    The best iterate is kept on ``best`` so callers can inspect it.
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


class BoundViolation(RidgelessError):
    """A fitted path left the model's declared box bounds."""


class NewtonFailure(RidgelessError):
    """Newton iteration on the algebraic equations did not converge."""


class StepUnderflow(RidgelessError):
    """Adaptive integration could not keep the step above the minimum."""


class ShootingDiverged(RidgelessError):
    """Integration blew up while searching for the initial co-state."""


class NoBracket(RidgelessError):
    """Bisection could not bracket a sign change of the shooting residual."""
