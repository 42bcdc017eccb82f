"""Exception hierarchy shared by all modules."""


class RobustPHError(Exception):
    """Base class for package errors."""


class DomainError(RobustPHError, ValueError):
    """An argument lies outside the domain of a function."""


class ParameterDomainError(DomainError):
    """Baseline parameters outside the family's valid region."""


class SingularityError(DomainError):
    """Evaluation at a point where the hazard or its gradient is singular."""


class QuadratureError(RobustPHError):
    """Adaptive quadrature failed to reach the requested tolerance.

    The best estimate and its error bound are kept on the exception.
    """

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


class NearSingularError(RobustPHError, ArithmeticError):
    """A matrix is too ill-conditioned to invert reliably."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class DegenerateInformationError(NearSingularError):
    """The score-sensitivity matrix J is (numerically) singular."""


class DegenerateTestError(NearSingularError):
    """The r x r Wald kernel M' Sigma M is singular, or the power is degenerate."""


class DataValidationError(RobustPHError, ValueError):
    """Input data violate the censored-sample contract."""


class SchemaError(DataValidationError):
    """A required column is missing from an input table."""


class HypothesisParseError(RobustPHError, ValueError):
    """A hypothesis string could not be parsed."""

    def __init__(self, message, position=0):
        super().__init__(f"{message} (at position {position})")
        self.position = position
