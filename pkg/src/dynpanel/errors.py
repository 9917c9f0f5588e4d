"""Exception hierarchy used across the package."""


class DynPanelError(Exception):
    """Base class for all package errors."""


class ParseError(DynPanelError):
    """A CSV row could not be parsed."""


class SchemaError(DynPanelError):
    """A required column is missing or the layout is inconsistent."""


class DomainError(DynPanelError, ValueError):
    """A value lies outside its admissible domain."""


class GapPolicyViolation(DynPanelError):
    """An individual has non-consecutive periods under strict gap handling."""


class DegenerateVector(DynPanelError, ValueError):
    """A zero (or numerically zero) vector cannot be put on the unit sphere."""


class NoSwitchersError(DynPanelError):
    """No untrimmed switcher window survives, so the objective is flat at zero."""


class NoFeasiblePointError(DynPanelError):
    """Every candidate violates the ``w >= iota`` floor, even after restarts."""


class DimensionTooLarge(DynPanelError, ValueError):
    """The grid oracle only handles parameter dimension up to 4."""


class DegenerateSpread(DynPanelError):
    """A bootstrap spread statistic is zero, so the rate cannot be estimated."""


class FailureRateError(DynPanelError):
    """Too many bootstrap replicates failed."""


class InsufficientTailDraws(DynPanelError):
    """Too few simulated draws survive the tail conditioning."""
