"""Exception types raised across the package."""


class PolylabError(Exception):
    """Base class for all package errors."""


class DegenerateInput(PolylabError, ValueError):
    """Point cloud is not affinely full-dimensional."""


class OriginNotInterior(PolylabError, ValueError):
    """Origin does not lie strictly inside the polytope."""


class NotInBall(PolylabError, ValueError):
    """A vertex lies outside the closed unit ball."""


class Unsupported(PolylabError, NotImplementedError):
    """Requested path is not available in this dimension."""


class OutOfInjectivityRegion(PolylabError, ValueError):
    """Argument outside the injectivity region of the spherical exponential map."""


class NonTerminating(PolylabError, RuntimeError):
    """Adaptive shell sampling exceeded its shell cap."""


class Unbounded(PolylabError, ValueError):
    """Half-space intersection does not bound a cell around the origin."""


class ZeroPoint(PolylabError, ValueError):
    """Inversion applied to the origin."""


class TooLarge(PolylabError, ValueError):
    """Combinatorial order above the supported maximum."""


class InsufficientSamples(PolylabError, ValueError):
    """Not enough samples for the requested statistic."""


class NonPositiveValue(PolylabError, ValueError):
    """Log-log fit received a non-positive value."""


class EmptyTail(PolylabError, ValueError):
    """No sample falls in the requested tail event.

    ``upper_bound`` carries a one-sided bound on the reported quantity
    computed from the Wilson upper limit of the tail probability.
    """

    def __init__(self, message, upper_bound=None):
        super().__init__(message)
        self.upper_bound = upper_bound


class InvalidConfig(PolylabError, ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class EmptyStore(PolylabError, ValueError):
    """Result store holds no replicate records."""
