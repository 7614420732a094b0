"""Exception hierarchy shared by all gaussruin modules."""


class GaussRuinError(Exception):
    """Base class for all errors raised by gaussruin."""


class DomainError(GaussRuinError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericError(GaussRuinError, ArithmeticError):
    """A user-supplied evaluator produced a non-finite value."""


class IntegrationError(GaussRuinError, RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, value=float("nan"), error_estimate=float("inf")):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class DegenerateVarianceError(GaussRuinError, ValueError):
    """The variance of the discounted loss vanishes where it must be positive."""


class HypothesisError(GaussRuinError):
    """A hypothesis behind the ruin asymptotics failed for the given model.

    ``condition`` names the failed condition, e.g. ``"unique maximum of sigma at T"``.
    """

    def __init__(self, condition, detail=""):
        msg = f"hypothesis violated: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.condition = condition


class ModelError(GaussRuinError, ValueError):
    """The covariance kernel is not positive semidefinite on the requested grid."""


class ConfigError(GaussRuinError, ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InsufficientDataError(GaussRuinError, RuntimeError):
    """Too few effective samples to form the requested estimate."""
