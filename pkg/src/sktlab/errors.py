"""Exception types shared across the package."""


class SKTError(Exception):
    """Base class for all package errors."""


class ConfigError(SKTError):
    """Configuration document is invalid; ``where`` points at the offending key."""

    def __init__(self, where, message):
        self.where = where
        self.message = message
        super().__init__(f"{where}: {message}")


class DetailedBalanceViolated(SKTError):
    pass


class AsymmetricSupport(SKTError):
    """a_ij > 0 but a_ji = 0: no positive reversible measure exists."""


class CycleInconsistent(SKTError):
    """Kolmogorov cycle products disagree: coefficients admit no reversible measure."""


class NonPositiveDensity(SKTError):
    pass


class NewtonDiverged(SKTError):
    def __init__(self, residual, iterations, message=""):
        self.residual = residual
        self.iterations = iterations
        text = message or (
            f"Newton iteration exhausted after {iterations} steps, "
            f"final residual {residual:.3e}"
        )
        super().__init__(text)


class LinearSolveFailed(SKTError):
    pass


class PositivityLost(SKTError):
    pass


class StepFailed(SKTError):
    """Wraps a solver error with the failing step index attached."""

    def __init__(self, step, t, cause):
        self.step = step
        self.t = t
        self.cause = cause
        super().__init__(f"step {step} (t={t:.6g}): {cause}")
