"""Exception types shared across the package.

Every error raised by the library derives from :class:`SliceKitError` so
callers can trap the whole family with a single except clause.  The CLI maps
:class:`ConfigError` to exit code 2 and reserves exit code 3 for a
certification verdict of "not certified" (which is a result, not an error).
"""

from __future__ import annotations


class SliceKitError(Exception):
    """Base class for all library errors."""


class NegativeEntry(SliceKitError):
    """A matrix or row contains an entry below -tol."""


class RowSumExceedsOne(SliceKitError):
    """A row sums to more than 1 + tol."""


class DimensionMismatch(SliceKitError):
    """Operands have incompatible shapes."""


class NonConvergence(SliceKitError):
    """Power iteration failed to settle within the iteration budget."""


class AssumptionViolated(SliceKitError):
    """An update matrix failed validation while the engine runs strict.

    Carries the offending :class:`~slicekit.matrix_core.ValidationReport` in
    ``report`` when available.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NoSubStochasticRow(SliceKitError):
    """A contraction statistic was requested for a product with no
    sub-stochastic row."""


class InvalidIndex(SliceKitError):
    """An update-position index is outside the valid range for its slice."""


class InvalidLength(SliceKitError):
    """A slice length below 1 was supplied."""


class InvalidSubset(SliceKitError):
    """A slice-index subset refers to indices outside the sample."""


class MeaninglessBound(SliceKitError):
    """The requested length cap is undefined because the row-sum cap is not
    below the available contraction budget at this index."""


class InfeasibleWeights(SliceKitError):
    """A neighborhood is too large (or too demanding) for the weight floors
    to be satisfiable."""


class ConfigError(SliceKitError):
    """An experiment configuration file is missing, malformed, or
    inconsistent."""
