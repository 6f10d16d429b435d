"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class,
so that simulation drivers can count and classify failures without string
matching.
"""


class GoodFeatError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GoodFeatError):
    """A configuration value is missing, malformed, or out of range."""


class BehindCamera(GoodFeatError):
    """A point's depth in the camera frame is below the minimum depth."""


class NotPositiveDefinite(GoodFeatError):
    """A matrix that must be positive definite failed its factorization."""


class RankDeficient(GoodFeatError):
    """A linear system does not constrain all six pose degrees of freedom."""


class Diverged(GoodFeatError):
    """An iterative solve increased its cost on consecutive iterations."""


class TooLarge(GoodFeatError):
    """An exhaustive enumeration would exceed the configured size guard."""


class Degenerate(GoodFeatError):
    """A generated scenario has too few usable measurements."""


class DegenerateBaseline(GoodFeatError):
    """A ratio's reference error is numerically zero."""
