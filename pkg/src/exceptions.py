"""
Error hierarchy for the tree-correlation toolkit.

Errors fall into three families that the command line maps to exit codes:
- DataError: the input data cannot be used (exit code 3)
- ParameterError: an argument lies outside its domain (exit code 2)
- ConvergenceError: a numerical routine failed to converge
"""


class TreeCorrError(Exception):
    """Base class for all toolkit errors."""


class DataError(TreeCorrError):
    """Input data are malformed or statistically unusable."""


class TreeValidationError(DataError):
    """A paired tree dataset violates its structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        summary = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            summary += f"; ... {more} more"
        super().__init__(f"invalid paired tree data: {summary}")


class DataFormatError(DataError):
    """A paired tree file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class NotDSPGMError(DataError):
    """An operation that needs one observation per node got a longer series."""


class InsufficientSamplesError(DataError):
    """A generation holds too few samples for the requested estimate."""


class DegenerateVarianceError(DataError):
    """A sample has zero variance where a positive one is required."""


class VertexCoincidentError(DataError):
    """A point coincides with the vertex and has no polar angle."""


class AngularSpanError(DataError):
    """No pair of lines through the vertex bounds the points in a proper wedge."""


class CopulaUnderflowError(DataError):
    """A standard normal probability rounded to exactly 0 or 1."""


class ParameterError(TreeCorrError, ValueError):
    """An argument lies outside its admissible range."""


class RegionError(ParameterError):
    """The external point is not where the geometry requires it to be."""


class VerticalTangentError(ParameterError):
    """A tangent line from the external point is vertical (unbounded slope)."""


class ConditionInapplicableError(ParameterError):
    """The angle-decay condition cannot be evaluated for these parameters."""


class UnknownPatternError(ParameterError):
    """A damping pattern, schedule or family tag is not recognised."""


class ConvergenceError(TreeCorrError, ArithmeticError):
    """A numerical inversion did not converge."""
