import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from heavytail.distributions import ParetoSpec
from heavytail.errors import DomainError, InputError
from heavytail.montecarlo import (
    CHUNK_ROWS,
    EmpiricalDistribution,
    GridSpec,
    crossing_detect,
    dkw_epsilon,
    draw_chunked,
    empirical_fsd_test,
    empirical_ssd_test,
    exchangeable_correlation,
    ks_distance,
    quantile_curve,
    read_document,
    stream,
    write_document,
    write_rows,
)

samples = hnp.arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e3, 1e3))


def test_dkw_formula():
    assert dkw_epsilon(10**6, 0.99) == pytest.approx(math.sqrt(math.log(200) / 2e6))
    with pytest.raises(DomainError):
        dkw_epsilon(10, 1.0)


def test_streams_are_keyed():
    a = stream(1, "T1", 0).random(5)
    assert np.array_equal(a, stream(1, "T1", 0).random(5))
    assert not np.array_equal(a, stream(1, "T1", 1).random(5))
    assert not np.array_equal(a, stream(2, "T1", 0).random(5))


def test_chunked_draws_do_not_depend_on_workers():
    n = 2 * CHUNK_ROWS + 17
    fn = lambda rng, m: ParetoSpec(0.5).sample(rng, m)
    one = draw_chunked(fn, n, 5, ("k",), workers=1)
    four = draw_chunked(fn, n, 5, ("k",), workers=4)
    assert one.shape == (n,) and np.array_equal(one, four)


def test_chunked_prefix_property():
    fn = lambda rng, m: rng.random(m)
    small = draw_chunked(fn, 100, 0)
    big = draw_chunked(fn, CHUNK_ROWS + 5, 0)
    # every chunk owns a stream, so a short run is a prefix of a longer one
    assert np.array_equal(small, big[:100])


def test_chunked_rejects_bad_sizes():
    with pytest.raises(DomainError):
        draw_chunked(lambda r, m: r.random(m), 0, 0)


@given(samples, st.floats(0.001, 0.999))
def test_quantile_is_left_inverse(values, p):
    emp = EmpiricalDistribution(values)
    q = emp.quantile(p)
    assert emp.cdf(q) >= p - 1e-12
    smaller = emp.sorted_values[emp.sorted_values < q]
    if smaller.size:
        assert emp.cdf(smaller.max()) < p + 1e-12


@given(samples, st.floats(-2e3, 2e3))
def test_integrated_cdf_is_expected_shortfall_below(values, x):
    emp = EmpiricalDistribution(values)
    assert emp.integrated_cdf(x) == pytest.approx(np.mean(np.maximum(x - values, 0.0)), rel=1e-9, abs=1e-9)


@given(samples)
def test_survival_plus_cdf(values):
    emp = EmpiricalDistribution(values)
    xs = np.linspace(-1e3, 1e3, 7)
    assert np.allclose(emp.cdf(xs) + emp.survival(xs), 1.0)


def test_empirical_rejects_bad_input():
    with pytest.raises(InputError):
        EmpiricalDistribution([])
    with pytest.raises(InputError):
        EmpiricalDistribution([1.0, float("nan")])


def test_ks_distance_matches_scipy():
    x = ParetoSpec(0.7).sample(stream(3), 5000)
    assert ks_distance(x, ParetoSpec(0.7).cdf) == pytest.approx(stats.kstest(x, ParetoSpec(0.7).cdf).statistic)


def test_dkw_band_coverage():
    """Over 300 replications the 90% band should be breached about 10% of the time or less."""
    n, conf = 500, 0.9
    eps = dkw_epsilon(n, conf)
    breaches = sum(ks_distance(ParetoSpec(0.5).sample(stream(rep, "cov"), n), ParetoSpec(0.5).cdf) > eps
                   for rep in range(300))
    assert breaches / 300 <= 0.1 + 3 * math.sqrt(0.09 / 300)


def test_grid_region_and_log_spacing():
    a = EmpiricalDistribution(ParetoSpec(0.5).sample(stream(1), 1000))
    g = GridSpec(points=50, region=(3.0, 10.0)).build(a)
    assert g.size == 50 and g[0] > 3.0 and g[-1] < 10.0 and np.all(np.diff(g) > 0)
    assert GridSpec(points=50).refined().points == 99


def test_fsd_consistent_for_same_law_and_violated_for_shift():
    x = ParetoSpec(0.5).sample(stream(1), 50_000)
    y = ParetoSpec(0.5).sample(stream(2), 50_000)
    assert empirical_fsd_test(x, y).relation == "FSD-consistent"
    shifted = empirical_fsd_test(x + 1.0, y)
    assert shifted.relation == "FSD-violated" and shifted.strictness < -shifted.band
    fields = shifted.to_fields()
    assert fields["relation"] == "FSD-violated" and fields["n_low"] == 50_000


def test_fsd_detects_dominance_direction():
    x = ParetoSpec(0.5).sample(stream(1), 50_000)
    verdict = empirical_fsd_test(x, x * 2)
    # margins shrink toward the grid ends, so strictness shows in the interior
    assert verdict.consistent and verdict.margins.max() > verdict.band


def test_ssd_prefers_less_spread():
    rng = stream(4)
    z = rng.standard_normal(100_000)
    assert empirical_ssd_test(2 * z, z).relation == "SSD-consistent"
    assert empirical_ssd_test(z, 2 * z).relation == "SSD-violated"


def test_ssd_needs_finite_means():
    with pytest.raises(InputError):
        empirical_ssd_test([1.0, np.inf], [1.0, 2.0])


def test_crossing_detected_for_different_spreads():
    rng = stream(5)
    z = rng.standard_normal(100_000)
    w = 2 * stream(6).standard_normal(100_000)
    crossings = crossing_detect(z, w, GridSpec(spacing="linear"))
    assert len(crossings) == 1 and crossings[0][0] < 0 < crossings[0][1]
    assert crossing_detect(z, z + 1.0, GridSpec(spacing="linear")) == []


def test_quantile_curve_monotone():
    q = quantile_curve(ParetoSpec(1.0).sample(stream(7), 10_000), [0.5, 0.9, 0.99])
    assert q.shape == (3,) and np.all(np.diff(q) > 0)


def test_exchangeable_correlation_of_independent_columns():
    rows = stream(8).standard_normal((50_000, 4))
    assert abs(exchangeable_correlation(rows)) < 0.02
    with pytest.raises(InputError):
        exchangeable_correlation(np.ones(5))


def test_document_roundtrip(tmp_path):
    path = write_document(tmp_path / "d.txt", {"anchor": "T1-iid", "seed": 3})
    doc = read_document(path)
    assert doc["anchor"] == "T1-iid" and doc["seed"] == "3" and doc["tool_version"]
    with pytest.raises(DomainError):
        write_document(tmp_path / "bad.txt", {"k": "a\nb"})


def test_rows_csv_and_json_lines(tmp_path):
    rows = [{"x": 1.0, "y": 2}, {"x": 3.0, "y": 4}]
    csv_text = write_rows(tmp_path / "r.csv", rows).read_text()
    assert csv_text.splitlines()[0] == "x,y"
    lines = write_rows(tmp_path / "r.jsonl", rows, "json-lines").read_text().splitlines()
    assert json.loads(lines[1]) == rows[1]
    with pytest.raises(DomainError):
        write_rows(tmp_path / "r.x", rows, "xml")
