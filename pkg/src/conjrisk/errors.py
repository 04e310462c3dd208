"""Exception hierarchy shared by all conjrisk modules."""


class ConjRiskError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ConjRiskError, ValueError):
    """An argument violates a documented precondition or type invariant."""


class DegenerateGeometryError(ConjRiskError):
    """The relative velocity is too small to define an encounter plane."""


class DegenerateCovarianceError(ConjRiskError):
    """The projected 2x2 covariance is singular or not positive definite."""


class UndefinedVarianceError(ConjRiskError):
    """The Wald variance is undefined because the observed position is the origin."""


class QuadratureError(ConjRiskError):
    """Adaptive quadrature did not reach the requested tolerance.

    Attributes:
        estimate: best available value of the integral.
        error_bound: accumulated error estimate for ``estimate``.
    """

    def __init__(self, message, estimate, error_bound):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class PropertyViolationError(ConjRiskError):
    """A proved property (pc_hat <= p_obs) failed numerically.

    Attributes:
        offending: list of dicts describing each violating configuration.
    """

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class SchemaError(ConjRiskError):
    """A catalog header is missing a mandatory column."""


class EmptyCatalogError(ConjRiskError):
    """An operation that needs at least one record received none."""
