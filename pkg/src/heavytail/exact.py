"""Exact and semi-analytic oracles.

* St. Petersburg sums by exact rational enumeration.
* The CDF of a two-term weighted Pareto sum by adaptive quadrature, and
  the companion function ``H`` whose monotonicity in the smaller weight
  drives the two-asset dominance result.
* Expected utility of weighted sums of iid two-point variables by full
  enumeration of outcome patterns.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Callable, Sequence

from scipy import integrate, optimize

from .errors import BudgetError, DomainError

DEFAULT_NODE_BUDGET = 10**8
QUAD_ABS_TARGET = 1e-9
MAX_ENUMERATION_ASSETS = 20


def _fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


def format_fraction(value: Fraction) -> str:
    """``"p/q = decimal"``; the decimal is exact for dyadic denominators."""
    value = _fraction(value)
    with localcontext() as ctx:
        ctx.prec = 60
        dec = Decimal(value.numerator) / Decimal(value.denominator)
    text = format(dec.normalize(), "f") if dec != 0 else "0"
    return f"{value} = {text}"


# ---------------------------------------------------------------------------
# St. Petersburg sums


@dataclass
class DyadicPMF:
    """Exact law of a weighted St. Petersburg sum, truncated at a cutoff.

    ``atoms`` maps each attainable value below the cutoff to its
    probability; ``tail_cut`` is the mass of values at or above it.
    """

    atoms: dict = field(default_factory=dict)
    tail_cut: Fraction = Fraction(0)

    @property
    def total(self) -> Fraction:
        return sum(self.atoms.values(), Fraction(0)) + self.tail_cut

    def cdf(self, x, strict: bool = False) -> Fraction:
        """P(S < x) if ``strict`` else P(S <= x); ``x`` must not exceed the cutoff."""
        x = _fraction(x)
        if strict:
            return sum((p for v, p in self.atoms.items() if v < x), Fraction(0))
        return sum((p for v, p in self.atoms.items() if v <= x), Fraction(0))


def stp_sum_pmf(weights: Sequence, cutoff) -> DyadicPMF:
    """Convolve truncated St. Petersburg laws for ``sum w_i X_i`` below ``cutoff``."""
    ws = [_fraction(w) for w in weights]
    cutoff = _fraction(cutoff)
    if any(w <= 0 for w in ws):
        raise DomainError("weights must be positive")
    pmf = {Fraction(0): Fraction(1)}
    tail = Fraction(0)
    for w in ws:
        nxt: dict = {}
        for v, p in pmf.items():
            k, mass_left = 1, p
            while v + w * 2**k < cutoff:
                q = p / 2**k
                nxt[v + w * 2**k] = nxt.get(v + w * 2**k, Fraction(0)) + q
                mass_left -= q
                k += 1
            tail += mass_left
        pmf = nxt
    return DyadicPMF(pmf, tail)


def stp_sum_cdf_exact(weights: Sequence, x, strict: bool = True,
                      budget: int = DEFAULT_NODE_BUDGET) -> Fraction:
    """P(sum_i w_i X_i < x) (or ``<=`` when ``strict`` is off) for iid St. Petersburg X_i.

    Depth-first enumeration over each component's level k. A level is only
    explored while the remaining components, each at least 2, can still
    fit below ``x``; the last component is summed in closed form.
    """
    ws = [_fraction(w) for w in weights]
    x = _fraction(x)
    if not ws or any(w <= 0 for w in ws):
        raise DomainError("weights must be a non-empty list of positive rationals")
    if x <= 0:
        raise DomainError("x must be positive")
    n = len(ws)
    rest_min = [2 * sum(ws[i + 1:], Fraction(0)) for i in range(n)]
    below = (lambda a, b: a < b) if strict else (lambda a, b: a <= b)
    state = {"nodes": 0, "acc": Fraction(0), "excluded": Fraction(0)}

    def last_level_count(w, room):
        # number of k >= 1 with w * 2**k below room
        k = 0
        while below(w * 2 ** (k + 1), room):
            k += 1
        return k

    def visit(i, room, prob):
        state["nodes"] += 1
        if state["nodes"] > budget:
            raise BudgetError(
                f"enumeration exceeded {budget} nodes",
                used=state["nodes"], lower=state["acc"], upper=1 - state["excluded"])
        w = ws[i]
        if i == n - 1:
            k = last_level_count(w, room)
            state["acc"] += prob * (1 - Fraction(1, 2**k))
            state["excluded"] += prob * Fraction(1, 2**k)
            return
        k = 1
        while below(w * 2**k + rest_min[i], room):
            visit(i + 1, room - w * 2**k, prob / 2**k)
            k += 1
        state["excluded"] += prob / 2 ** (k - 1)

    visit(0, x, Fraction(1))
    return state["acc"]


@dataclass(frozen=True)
class StpComparison:
    x: Fraction
    p_first: Fraction
    p_second: Fraction

    @property
    def holds(self) -> bool:
        """First-order dominance direction at x: the k-average is no larger."""
        return self.p_first >= self.p_second


def stp_dominance_pair(k: int, l: int, x_grid: Sequence, budget: int = DEFAULT_NODE_BUDGET) -> list[StpComparison]:
    """Compare P(mean of k lotteries < x) with P(mean of l lotteries < x), exactly."""
    if k < 1 or l < 1:
        raise DomainError("k and l must be positive")
    wk = [Fraction(1, k)] * k
    wl = [Fraction(1, l)] * l
    out = []
    for x in x_grid:
        x = _fraction(x)
        out.append(StpComparison(x, stp_sum_cdf_exact(wk, x, True, budget),
                                 stp_sum_cdf_exact(wl, x, True, budget)))
    return out


# ---------------------------------------------------------------------------
# Two-term weighted Pareto sums


@dataclass(frozen=True)
class TwoTermIntegrand:
    """``eta * X1 + (1 - eta) * X2`` with independent Pareto(alpha1), Pareto(alpha2)."""

    alpha1: float
    alpha2: float
    eta: float = 0.5

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise DomainError("tail parameters must be positive")
        if not 0 <= self.eta <= 0.5:
            raise DomainError(f"eta must lie in [0, 1/2], got {self.eta}")

    @property
    def r1(self) -> float:
        return -1.0 / self.alpha1

    @property
    def r2(self) -> float:
        return -1.0 / self.alpha2


def _quad(f, a, b):
    # split near the lower limit where the integrand bends fastest
    mid = a + 0.01 * (b - a)
    total, err = 0.0, 0.0
    for lo, hi in ((a, mid), (mid, b)):
        with warnings.catch_warnings():
            # QUADPACK's own complaints are summarised by the error estimate below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
        total += val
        err += e
    if err > QUAD_ABS_TARGET:
        warnings.warn(f"quadrature error estimate {err:.2e} exceeds {QUAD_ABS_TARGET:.0e}", RuntimeWarning)
    return total


def h_function(spec: TwoTermIntegrand, x: float, z: float | None = None) -> float:
    """P(z * X1 + (1 - z) * X2 > x), written as the lower-limit term plus an integral.

    ``z`` defaults to ``spec.eta``.
    """
    z = spec.eta if z is None else z
    if not 0 < z <= 0.5:
        raise DomainError(f"z must lie in (0, 1/2], got {z}")
    if x < 1:
        raise DomainError(f"x must be at least 1, got {x}")
    r1, r2 = spec.r1, spec.r2
    y0 = ((x - z) / (1.0 - z)) ** (1.0 / r2)
    if y0 >= 1.0:
        return 1.0

    def integrand(y):
        t = (x - (1.0 - z) * y**r2) / z
        return max(t, 1.0) ** (1.0 / r1)

    return y0 + _quad(integrand, y0, 1.0)


def two_term_cdf(spec: TwoTermIntegrand, x: float) -> float:
    """P(eta * X1 + (1 - eta) * X2 <= x); zero below the support edge x = 1."""
    if x <= 1:
        return 0.0
    if spec.eta == 0:
        return 1.0 - x ** (-spec.alpha2)
    return 1.0 - h_function(spec, x)


def two_term_quantile(spec: TwoTermIntegrand, p: float) -> float:
    """Left quantile of the two-term sum by root finding on :func:`two_term_cdf`."""
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    hi = 2.0
    while two_term_cdf(spec, hi) < p:
        hi *= 2.0
    return optimize.brentq(lambda t: two_term_cdf(spec, t) - p, 1.0, hi, xtol=1e-12, rtol=1e-12)


def weighted_two_term_cdf(alpha1: float, alpha2: float, w1: float, w2: float, x: float) -> float:
    """P(w1 * X1 + w2 * X2 <= x) for any non-negative weights with a positive total."""
    total = w1 + w2
    if total <= 0:
        raise DomainError("weights must have a positive total")
    if w1 > w2:
        # keep the smaller weight in the eta slot
        alpha1, alpha2, w1, w2 = alpha2, alpha1, w2, w1
    return two_term_cdf(TwoTermIntegrand(alpha1, alpha2, w1 / total), x / total)


# ---------------------------------------------------------------------------
# Two-point enumeration


def two_point_eu_enumerate(a, b, prob_a, weights: Sequence, utility: Callable):
    """E[u(w . X)] for iid X_i equal to ``a`` w.p. ``prob_a`` and ``b`` otherwise.

    Sums over all 2**n outcome patterns. Pattern values and probabilities
    are exact rationals; the result stays exact when ``utility`` maps
    fractions to fractions, and is otherwise an ``fsum`` of floats.
    """
    n = len(weights)
    if n > MAX_ENUMERATION_ASSETS:
        raise BudgetError(f"{n} assets means 2**{n} patterns; limit is {MAX_ENUMERATION_ASSETS}", used=n)
    a, b, pa = _fraction(a), _fraction(b), _fraction(prob_a)
    ws = [_fraction(w) for w in weights]
    exact_terms, float_terms = [], []
    for pattern in itertools.product((0, 1), repeat=n):
        n_b = sum(pattern)
        prob = pa ** (n - n_b) * (1 - pa) ** n_b
        if prob == 0:
            continue
        value = sum((w * (b if bit else a) for w, bit in zip(ws, pattern)), Fraction(0))
        try:
            u = utility(value)
        except (TypeError, AttributeError):
            u = utility(float(value))
        if isinstance(u, (Fraction, int)):
            exact_terms.append(prob * u)
        else:
            float_terms.append(float(prob) * float(u))
    if not float_terms:
        return sum(exact_terms, Fraction(0))
    return math.fsum(float_terms + [float(t) for t in exact_terms])
