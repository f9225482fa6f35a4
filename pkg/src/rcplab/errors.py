"""Exception types shared across the package."""


class RcplabError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedLawOperation(RcplabError, TypeError):
    """Raised when an operation is undefined for a law (e.g. hazard of a point mass)."""


class InfiniteTailRatio(RcplabError, ValueError):
    """Raised when F(w) = 1 makes the odds ratio F/(1-F) infinite."""


class ConditioningTooRare(RcplabError, RuntimeError):
    """Rejection sampling accepted fewer replicas than the configured floor allows."""

    def __init__(self, accepted, total, floor):
        self.accepted = accepted
        self.total = total
        self.floor = floor
        super().__init__(
            f"conditioning event accepted {accepted}/{total} replicas "
            f"(rate below floor {floor:g})"
        )


class SearchLimitExceeded(RcplabError, RuntimeError):
    """An incremental search (e.g. for a count bound) hit its configured cap."""


class InvalidBracket(RcplabError, ValueError):
    """Bisection bracket does not straddle the target value."""


class WindowTooSmall(RcplabError, ValueError):
    """A space-time box does not fit inside the sample window."""
