"""Exception hierarchy shared by every heavytail module."""


class HeavyTailError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HeavyTailError, ValueError):
    """An argument lies outside the domain of a function."""


class ConfigurationError(HeavyTailError, ValueError):
    """An unsupported combination of specs or settings was requested."""


class DimensionError(HeavyTailError, ValueError):
    """Vectors that must have equal length do not."""


class OrderError(HeavyTailError, ValueError):
    """A majorization precondition does not hold."""


class SpecError(HeavyTailError, ValueError):
    """A scenario or preference spec violates one of its invariants."""


class InputError(HeavyTailError, ValueError):
    """A sample handed to a statistical routine is unusable."""


class BudgetError(HeavyTailError):
    """A computation exceeded its configured work budget.

    ``lower`` and ``upper`` bracket the quantity being computed at the
    moment the budget ran out, when such a bracket is available.
    """

    def __init__(self, message, *, used=None, lower=None, upper=None):
        super().__init__(message)
        self.used = used
        self.lower = lower
        self.upper = upper
