"""Exception hierarchy.

Each class carries an ``exit_code`` used by the command line front end.
"""


class ZibetaError(Exception):
    exit_code = 1


class ParameterDomainError(ZibetaError, ValueError):
    """A distribution parameter or argument lies outside its domain."""

    exit_code = 4


class DegenerateTruncationError(ZibetaError, ValueError):
    """The truncation window of a distribution carries (numerically) no mass."""

    exit_code = 5


class DegenerateConditionalError(ZibetaError, ValueError):
    exit_code = 5


class SpecificationError(ZibetaError, ValueError):
    """Model, data and parameters do not fit together."""

    exit_code = 4


class InvariantViolationError(ZibetaError, ValueError):
    exit_code = 5


class IngestionError(ZibetaError, ValueError):
    """Input file does not conform to the dataset schema."""

    exit_code = 3


class NonPDError(ZibetaError, ArithmeticError):
    """Covariance matrix could not be factorized, even with jitter."""

    exit_code = 5


class SamplerStateError(ZibetaError, RuntimeError):
    exit_code = 5


class SummaryError(ZibetaError, ValueError):
    exit_code = 5


class IntegrationError(ZibetaError, ArithmeticError):
    exit_code = 5


class ScoringError(ZibetaError, ValueError):
    exit_code = 4


class MetricUndefinedError(ScoringError):
    """A metric needs both classes (or positive observations) and got none."""
