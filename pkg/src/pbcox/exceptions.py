"""Exception hierarchy for pbcox.

Input problems (bad probabilities, malformed CSV, impossible requests)
raise subclasses of ``ValueError`` so callers can catch either the pbcox
type or the builtin. Numeric failures during fitting raise ``FitError``
subclasses carrying whatever partial state is useful for diagnosis.
"""


class PBCoxError(Exception):
    """Base class for all pbcox errors."""


class DomainError(PBCoxError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class CapacityError(PBCoxError):
    """A combinatorial computation would exceed its configured cap."""


class ParseError(PBCoxError, ValueError):
    """CSV input could not be parsed; message carries row/column location."""


class StructureError(PBCoxError, ValueError):
    """Data lacks the structure required (e.g. no events at all)."""


class DegenerateCovariateError(PBCoxError, ValueError):
    """A non-binary covariate column has zero variance."""


class EvaluationError(PBCoxError):
    """A likelihood evaluation produced numerically impossible values."""


class FitError(PBCoxError):
    """Base class for estimation failures."""


class DegenerateFitError(FitError):
    """The information matrix is singular near the optimum."""


class NonConvergenceError(FitError):
    """Iteration limit reached; carries the last iterate for inspection."""

    def __init__(self, message, last_result=None):
        super().__init__(message)
        self.last_result = last_result
