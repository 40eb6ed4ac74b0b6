import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from heavytail.errors import BudgetError, DomainError
from heavytail.exact import (
    TwoTermIntegrand,
    format_fraction,
    h_function,
    stp_dominance_pair,
    stp_sum_cdf_exact,
    stp_sum_pmf,
    two_point_eu_enumerate,
    two_term_cdf,
    two_term_quantile,
    weighted_two_term_cdf,
)

# St. Petersburg


def test_three_lottery_average_below_eight():
    assert stp_sum_cdf_exact([F(1, 3)] * 3, 8) == F(195, 256)


@pytest.mark.parametrize("m", range(1, 11))
def test_two_lottery_average_below_power_of_two(m):
    assert stp_sum_cdf_exact([F(1, 2)] * 2, 2**m) == 1 - F(2) ** (1 - m)


def test_single_lottery():
    assert stp_sum_cdf_exact([1], 2) == 0
    assert stp_sum_cdf_exact([1], 2, strict=False) == F(1, 2)
    assert stp_sum_cdf_exact([1], 5) == F(3, 4)


dyadic = st.sampled_from([F(1, 4), F(1, 3), F(1, 2), F(2, 3), F(1), F(3, 2)])


@settings(max_examples=40, deadline=None)
@given(st.lists(dyadic, min_size=1, max_size=3), st.integers(2, 40), st.booleans())
def test_enumeration_agrees_with_convolution(weights, x, strict):
    pmf = stp_sum_pmf(weights, x + 1)
    assert pmf.total == 1
    assert stp_sum_cdf_exact(weights, x, strict) == pmf.cdf(x, strict)


def test_budget_error_brackets_the_answer():
    weights, x = [F(1, 3)] * 3, 64
    exact = stp_sum_cdf_exact(weights, x)
    with pytest.raises(BudgetError) as info:
        stp_sum_cdf_exact(weights, x, budget=5)
    assert info.value.lower <= exact <= info.value.upper


def test_dominance_pair_direction():
    comps = stp_dominance_pair(1, 2, [2, 3, 4, 6, 8, 16])
    assert all(c.holds for c in comps)
    assert comps[-1].p_first == F(7, 8) == comps[-1].p_second
    assert comps[1].p_first == F(1, 2) > comps[1].p_second == F(1, 4)


@pytest.mark.parametrize("bad", [dict(weights=[], x=2), dict(weights=[0, 1], x=2), dict(weights=[1], x=0)])
def test_stp_domain_errors(bad):
    with pytest.raises(DomainError):
        stp_sum_cdf_exact(**bad)


def test_format_fraction():
    assert format_fraction(F(195, 256)) == "195/256 = 0.76171875"
    assert format_fraction(F(3, 4)) == "3/4 = 0.75"
    assert format_fraction(F(0)) == "0 = 0"
    assert format_fraction(F(1)) == "1 = 1"


# two-term sums


def _convolution_cdf(a1, a2, eta, x):
    """Independent route: integrate F2 against the density of X1."""
    if x <= 1:
        return 0.0
    if eta == 0:
        return 1 - x ** -a2
    upper = (x - (1 - eta)) / eta
    f = lambda t: a1 * t ** (-a1 - 1) * (1 - ((x - eta * t) / (1 - eta)) ** -a2)
    val, _ = integrate.quad(f, 1, upper, limit=400, epsabs=1e-13)
    return val


@pytest.mark.parametrize("a1,a2", [(0.3, 0.3), (0.3, 1.0), (1.0, 0.6), (2.0, 0.5)])
@pytest.mark.parametrize("eta", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("x", [1.1, 2.0, 7.0, 50.0])
def test_two_term_cdf_matches_convolution(a1, a2, eta, x):
    spec = TwoTermIntegrand(a1, a2, eta)
    assert two_term_cdf(spec, x) == pytest.approx(_convolution_cdf(a1, a2, eta, x), abs=1e-8)


def test_two_term_closed_form_at_unit_alpha():
    # eta = 1/2, alpha = 1, x = 2 integrates in closed form
    expected = 2 / 3 - 1 / 6 - math.log(3) / 8
    assert two_term_cdf(TwoTermIntegrand(1.0, 1.0, 0.5), 2.0) == pytest.approx(expected, abs=1e-10)


def test_two_term_edge_cases():
    spec = TwoTermIntegrand(0.5, 0.5, 0.3)
    assert two_term_cdf(spec, 1.0) == 0.0
    assert two_term_cdf(TwoTermIntegrand(0.5, 0.7, 0.0), 4.0) == pytest.approx(1 - 4 ** -0.7)
    with pytest.raises(DomainError):
        TwoTermIntegrand(0.5, 0.5, 0.6)
    with pytest.raises(DomainError):
        h_function(spec, 0.5)


@given(st.floats(0.2, 1.0), st.floats(0.2, 1.0), st.floats(0.01, 0.5), st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_two_term_quantile_roundtrip(a1, a2, eta, p):
    spec = TwoTermIntegrand(a1, a2, eta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        q = two_term_quantile(spec, p)
        assert two_term_cdf(spec, q) == pytest.approx(p, abs=1e-8)


def test_weighted_cdf_scales_and_swaps():
    base = two_term_cdf(TwoTermIntegrand(0.4, 0.8, 0.25), 3.0)
    assert weighted_two_term_cdf(0.4, 0.8, 1.0, 3.0, 12.0) == pytest.approx(base, abs=1e-12)
    assert weighted_two_term_cdf(0.8, 0.4, 3.0, 1.0, 12.0) == pytest.approx(base, abs=1e-12)


@pytest.mark.parametrize("a1,a2,x", [(0.3, 0.3, 2.0), (0.5, 1.0, 5.0), (1.0, 1.0, 1.5)])
def test_h_increases_towards_balance(a1, a2, x):
    spec = TwoTermIntegrand(a1, a2)
    zs = np.linspace(0.05, 0.5, 10)
    hs = [h_function(spec, x, z) for z in zs]
    assert np.all(np.diff(hs) > 0)


def test_h_is_survival():
    spec = TwoTermIntegrand(0.6, 0.6, 0.3)
    assert h_function(spec, 4.0) == pytest.approx(1 - two_term_cdf(spec, 4.0), abs=1e-14)


# two-point enumeration


def test_two_point_exact_small_case():
    # X in {1, 3} equally likely; w = (1/2, 1/2); u = identity -> mean 2
    assert two_point_eu_enumerate(1, 3, F(1, 2), [F(1, 2), F(1, 2)], lambda v: v) == 2
    # u(v) = v^2: outcomes 1, 2, 2, 3 -> (1 + 4 + 4 + 9) / 4
    assert two_point_eu_enumerate(1, 3, F(1, 2), [F(1, 2), F(1, 2)], lambda v: v * v) == F(9, 2)


def test_two_point_float_fallback():
    val = two_point_eu_enumerate(1, 4, 0.5, [0.5, 0.5], math.sqrt)
    assert isinstance(val, float)
    assert val == pytest.approx((1 + 2 * math.sqrt(2.5) + 2) / 4)


def test_two_point_budget():
    with pytest.raises(BudgetError):
        two_point_eu_enumerate(1, 2, 0.5, [F(1, 21)] * 21, lambda v: v)
