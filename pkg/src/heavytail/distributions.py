"""Samplers, CDFs and quantile functions for the Pareto family and relatives.

All specs are frozen dataclasses. Sampling always takes an explicit
``numpy.random.Generator``; callers own stream partitioning (see
:mod:`heavytail.montecarlo`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError

# St. Petersburg draws are capped at this many doublings; the lost mass is < 2**-62.
STP_MAX_LEVEL = 62


def _as_output(arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _check_open_unit(p, name="p"):
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise DomainError(f"{name} must lie in (0, 1), got {p!r}")
    return p_arr


def _uniform_open_right(rng, size):
    """Uniforms on (0, 1]; safe to raise to negative powers."""
    return 1.0 - rng.random(size)


def sample_gamma(rng: np.random.Generator, shape: float, size) -> np.ndarray:
    """Gamma(shape, 1) draws, boosting shapes below one.

    For ``shape < 1`` a Gamma(shape + 1) draw is multiplied by
    ``U ** (1 / shape)``, which is exact and avoids rejection loops that
    degrade for very small shapes.
    """
    if shape <= 0:
        raise DomainError(f"gamma shape must be positive, got {shape}")
    if shape >= 1:
        return rng.standard_gamma(shape, size)
    boosted = rng.standard_gamma(shape + 1.0, size)
    return boosted * _uniform_open_right(rng, size) ** (1.0 / shape)


@dataclass(frozen=True)
class ParetoSpec:
    """Pareto law with survival ``(scale / x) ** alpha`` on ``[scale, inf)``."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.scale > 0:
            raise DomainError(f"scale must be positive, got {self.scale}")

    @property
    def extremely_heavy(self) -> bool:
        return self.alpha <= 1

    @property
    def infinite_mean(self) -> bool:
        return self.alpha <= 1

    @property
    def tail_index(self) -> float:
        return self.alpha

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.scale)
        return _as_output(np.where(x < self.scale, 0.0, 1.0 - (self.scale / safe) ** self.alpha))

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.scale)
        return _as_output(np.where(x < self.scale, 1.0, (self.scale / safe) ** self.alpha))

    def quantile(self, p):
        return _as_output(self._ppf(_check_open_unit(p)))

    def _ppf(self, u):
        return self.scale * (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / self.alpha)

    def sample(self, rng, n):
        return self.scale * _uniform_open_right(rng, n) ** (-1.0 / self.alpha)


def pareto_cdf(spec: ParetoSpec, x):
    return spec.cdf(x)


def pareto_quantile(spec: ParetoSpec, p):
    return spec.quantile(p)


@dataclass(frozen=True)
class GPDSpec:
    """Generalized Pareto law ``1 - (1 + xi * x / beta) ** (-1 / xi)`` on ``x >= 0``."""

    xi: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.xi >= 0:
            raise DomainError(f"xi must be non-negative, got {self.xi}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def infinite_mean(self) -> bool:
        return self.xi >= 1

    @property
    def tail_index(self) -> float:
        return math.inf if self.xi == 0 else 1.0 / self.xi

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.xi == 0:
            return _as_output(-np.expm1(-x / self.beta))
        return _as_output(1.0 - (1.0 + self.xi * x / self.beta) ** (-1.0 / self.xi))

    def quantile(self, p):
        return _as_output(self._ppf(_check_open_unit(p)))

    def _ppf(self, u):
        tail = 1.0 - np.asarray(u, dtype=float)
        if self.xi == 0:
            return -self.beta * np.log(tail)
        return self.beta / self.xi * np.expm1(-self.xi * np.log(tail))

    def sample(self, rng, n):
        return self._ppf(rng.random(n))

    def as_pareto(self) -> ParetoSpec:
        """The Pareto law reached by the map ``x -> 1 + xi * x / beta``."""
        if self.xi == 0:
            raise ConfigurationError("xi = 0 (exponential) has no Pareto counterpart")
        return ParetoSpec(1.0 / self.xi)

    def to_pareto(self, y):
        return 1.0 + self.xi * np.asarray(y, dtype=float) / self.beta

    def from_pareto(self, x):
        return self.beta * (np.asarray(x, dtype=float) - 1.0) / self.xi


@dataclass(frozen=True)
class FellerParetoSpec:
    """Law of ``mu + sigma * (Z1 / Z) ** gamma`` with Z1 ~ Gamma(beta), Z ~ Gamma(alpha)."""

    alpha: float
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "sigma"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def infinite_mean(self) -> bool:
        return self.alpha <= self.gamma

    @property
    def tail_index(self) -> float:
        return self.alpha / self.gamma

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = np.maximum((x - self.mu) / self.sigma, 0.0) ** (1.0 / self.gamma)
        if self.beta == 1:
            # Pareto type IV closed form.
            out = 1.0 - (1.0 + t) ** (-self.alpha)
        else:
            # (Z1/Z) is beta-prime(beta, alpha); map to the incomplete beta.
            out = special.betainc(self.beta, self.alpha, t / (1.0 + t))
        return _as_output(np.where(x <= self.mu, 0.0, out))

    def quantile(self, p):
        return _as_output(self._ppf(_check_open_unit(p)))

    def _ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.beta == 1:
            ratio = (1.0 - u) ** (-1.0 / self.alpha) - 1.0
        else:
            b = special.betaincinv(self.beta, self.alpha, u)
            ratio = b / (1.0 - b)
        return self.mu + self.sigma * ratio ** self.gamma

    def sample(self, rng, n):
        z1 = sample_gamma(rng, self.beta, n)
        z = sample_gamma(rng, self.alpha, n)
        return self.mu + self.sigma * (z1 / z) ** self.gamma


@dataclass(frozen=True)
class StPetersburgSpec:
    """Lottery paying ``2**k`` with probability ``2**-k`` for k = 1, 2, ..."""

    @property
    def infinite_mean(self) -> bool:
        return True

    @property
    def tail_index(self) -> float:
        return 1.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            levels = np.floor(np.log2(np.maximum(x, 1.0)))
        return _as_output(np.where(x < 2, 0.0, 1.0 - 2.0 ** -levels))

    def _ppf(self, u):
        tail = 1.0 - np.asarray(u, dtype=float)
        k = np.minimum(1.0 + np.floor(-np.log2(tail)), STP_MAX_LEVEL)
        return 2.0 ** k

    def sample(self, rng, n):
        return self._ppf(rng.random(n))


@dataclass(frozen=True)
class TwoPointSpec:
    """Takes value ``a`` with probability ``prob_a`` and ``b`` otherwise."""

    a: float
    b: float
    prob_a: float = 0.5

    def __post_init__(self):
        if not 0 <= self.prob_a <= 1:
            raise DomainError(f"prob_a must lie in [0, 1], got {self.prob_a}")

    @property
    def infinite_mean(self) -> bool:
        return False

    @property
    def tail_index(self) -> float:
        return math.inf

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = sorted((self.a, self.b))
        p_lo = self.prob_a if self.a <= self.b else 1.0 - self.prob_a
        if lo == hi:
            return _as_output(np.where(x >= lo, 1.0, 0.0))
        return _as_output(np.select([x < lo, x < hi], [0.0, p_lo], 1.0))

    def _ppf(self, u):
        return np.where(np.asarray(u) < self.prob_a, float(self.a), float(self.b))

    def sample(self, rng, n):
        return self._ppf(rng.random(n))


@dataclass(frozen=True)
class ParetoSumSpec:
    """Finite weighted sum ``sum_j lambdas[j] * Y_j`` of independent Pareto(alphas[j])."""

    lambdas: tuple
    alphas: tuple

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "alphas", tuple(float(v) for v in self.alphas))
        if len(self.lambdas) != len(self.alphas) or not self.lambdas:
            raise DomainError("lambdas and alphas must be non-empty and of equal length")
        if any(v < 0 for v in self.lambdas) or sum(self.lambdas) <= 0:
            raise DomainError("lambdas must be non-negative with a positive total")
        if any(not a > 0 for a in self.alphas):
            raise DomainError("alphas must be positive")

    @property
    def infinite_mean(self) -> bool:
        return all(a <= 1 for a, lam in zip(self.alphas, self.lambdas) if lam > 0)

    @property
    def tail_index(self) -> float:
        return min(a for a, lam in zip(self.alphas, self.lambdas) if lam > 0)

    def sample(self, rng, n):
        total = np.zeros(n)
        for lam, a in zip(self.lambdas, self.alphas):
            total += lam * _uniform_open_right(rng, n) ** (-1.0 / a)
        return total


MarginSpec = Union[ParetoSpec, GPDSpec, FellerParetoSpec, StPetersburgSpec, TwoPointSpec, ParetoSumSpec]

TRANSFORM_KINDS = ("identity", "cap", "floor-max", "excess", "tail-beyond", "trigger")


@dataclass(frozen=True)
class MarginTransform:
    """Pointwise modification applied to every portfolio component.

    ``tail-beyond`` keeps a Pareto draw above ``c`` and replaces the body
    ``[1, c]`` by a uniform law on ``(0, c)``, so the result has survival
    ``t ** -alpha`` for ``t >= c`` and is positive almost surely.
    ``trigger`` multiplies by an event indicator of probability ``p``.
    """

    kind: str = "identity"
    c: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ConfigurationError(f"unknown transform {self.kind!r}; expected one of {TRANSFORM_KINDS}")
        if self.kind in ("cap", "floor-max", "excess", "tail-beyond"):
            if self.c is None or not self.c >= 1:
                raise DomainError(f"{self.kind} needs a threshold c >= 1, got {self.c}")
        if self.kind == "trigger":
            if self.p is None or not 0 < self.p < 1:
                raise DomainError(f"trigger needs a probability p in (0, 1), got {self.p}")

    @classmethod
    def parse(cls, text: str) -> "MarginTransform":
        """Parse ``identity``, ``cap:10``, ``floor:2``, ``excess:2``, ``tail:2`` or ``trigger:0.1``."""
        name, _, arg = text.partition(":")
        aliases = {"floor": "floor-max", "tail": "tail-beyond", "max": "floor-max"}
        kind = aliases.get(name, name)
        if kind == "identity":
            return cls()
        if not arg:
            raise ConfigurationError(f"transform {text!r} needs a parameter")
        if kind == "trigger":
            return cls(kind, p=float(arg))
        return cls(kind, c=float(arg))

    def apply(self, x, *, margin=None, events=None):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x
        if self.kind == "cap":
            return np.minimum(x, self.c)
        if self.kind == "floor-max":
            return np.maximum(x, self.c)
        if self.kind == "excess":
            return np.maximum(x - self.c, 0.0)
        if self.kind == "tail-beyond":
            if not isinstance(margin, ParetoSpec) or margin.scale != 1:
                raise ConfigurationError("tail-beyond is defined for Pareto(alpha) margins with unit scale")
            if self.c == 1:
                return x
            body = self.c * margin.cdf(x) / margin.cdf(self.c)
            return np.where(x > self.c, x, body)
        if events is None:
            raise ConfigurationError("trigger transform needs event indicators")
        return np.where(events, x, 0.0)


def sample(spec, rng: np.random.Generator, n: int, transform: MarginTransform | None = None) -> np.ndarray:
    """Draw ``n`` independent values of ``spec``, optionally transformed.

    A trigger transform uses events independent of the draws.
    """
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    if not hasattr(spec, "sample"):
        raise ConfigurationError(f"cannot sample from {type(spec).__name__}")
    values = spec.sample(rng, n)
    if transform is None or transform.kind == "identity":
        return values
    events = rng.random(n) < transform.p if transform.kind == "trigger" else None
    return transform.apply(values, margin=spec, events=events)


@dataclass(frozen=True)
class CommonShockSpec:
    """Dimension and gamma shapes of a common-shock Pareto vector.

    Components are ``Z_i ~ Gamma(beta)`` sharing one ``Z ~ Gamma(alpha)``.
    """

    n: int
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.n}")
        if not self.alpha > 0 or not self.beta > 0:
            raise DomainError("alpha and beta must be positive")

    def margin(self, gamma_exp: float = 1.0):
        """Marginal law of every coordinate produced by :func:`sample_common_shock`."""
        if self.beta == 1 and gamma_exp == 1:
            return ParetoSpec(self.alpha)
        return FellerParetoSpec(self.alpha, self.beta, gamma_exp)


def sample_common_shock(spec: CommonShockSpec, gamma_exp: float, rng, n: int) -> np.ndarray:
    """Rows of a common-shock vector, shape ``(n, spec.n)``.

    With ``beta == 1`` and ``gamma_exp == 1`` rows are ``(Z_i + Z) / Z``
    (Pareto(alpha) margins, Clayton survival copula); otherwise they are
    ``(Z_i / Z) ** gamma_exp`` (Feller-Pareto margins).
    """
    if not gamma_exp > 0:
        raise DomainError(f"gamma_exp must be positive, got {gamma_exp}")
    z = sample_gamma(rng, spec.alpha, n)[:, None]
    zi = sample_gamma(rng, spec.beta, (n, spec.n))
    if spec.beta == 1 and gamma_exp == 1:
        return (zi + z) / z
    return (zi / z) ** gamma_exp


def clayton_survival_copula(u: Sequence[float], alpha: float) -> float:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise DomainError("u must be a non-empty vector")
    _check_open_unit(u, "u")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    return float((np.sum(u ** (-1.0 / alpha)) - u.size + 1.0) ** (-alpha))
