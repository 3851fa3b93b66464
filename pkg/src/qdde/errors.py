"""Exception types shared across the package."""


class QddeError(Exception):
    """Base class for all package errors."""


class DomainError(QddeError):
    """A point lies outside the spiral domain (or is zero where forbidden)."""


class EmptySeriesError(QddeError):
    """An operation would leave no coefficients (e.g. differentiating past the order)."""


class TruncationWindowError(QddeError):
    """A bilateral sum hit its hard index cap before the tail converged."""

    def __init__(self, message: str, last_term: float = float("nan")):
        super().__init__(message)
        self.last_term = last_term


class SmallDivisorError(QddeError):
    """A recursion denominator fell below the certified spectral-gap floor."""


class ConsistencyError(QddeError):
    """Two independent computation routes disagree beyond tolerance."""


class ContractionSearchError(QddeError):
    """The scale search failed to make the coupling operator a 1/2-contraction."""


class DataError(QddeError):
    """Input data is structurally invalid or produced non-finite values."""
