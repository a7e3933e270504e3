"""Exception types shared across the package."""


class Genus2Error(Exception):
    """Base class for structured errors raised by this package."""


class FieldError(Genus2Error):
    """Invalid field construction or mixing elements of different fields."""


class DimensionError(Genus2Error):
    """Matrix/vector shape mismatch."""


class NotAlternatingError(Genus2Error):
    """A form violated the alternating (zero diagonal, skew) invariant."""


class UnsupportedStructureError(Genus2Error):
    """Input falls in a structurally recognised but out-of-scope case.

    Carries enough detail for the caller to report why (e.g. a local-ring
    centroid with nontrivial radical, or genus > 2).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class WitnessError(Genus2Error):
    """An internally produced witness failed its verification check."""
