"""Stochastic dominance checks for portfolios of infinite-mean Pareto risks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetError,
    ConfigurationError,
    DimensionError,
    DomainError,
    HeavyTailError,
    InputError,
    OrderError,
    SpecError,
)
from .majorization import WeightVector, majorizes, t_transform_chain  # noqa: E402

__all__ = [
    "__version__",
    "BudgetError",
    "ConfigurationError",
    "DimensionError",
    "DomainError",
    "HeavyTailError",
    "InputError",
    "OrderError",
    "SpecError",
    "WeightVector",
    "majorizes",
    "t_transform_chain",
]
