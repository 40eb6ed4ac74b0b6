import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heavytail.errors import DimensionError, DomainError, OrderError
from heavytail.majorization import (
    TTransform,
    WeightVector,
    apply_chain,
    majorizes,
    random_majorizing_pair,
    t_transform_chain,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 8)


def test_concentrated_majorizes_uniform():
    check = majorizes((1, 0), (0.5, 0.5))
    assert check and check.strict and check.outcome == "true"


def test_reverse_direction_fails_with_index():
    check = majorizes((0.5, 0.5), (1, 0))
    assert not check and check.failure_index == 1
    assert "k=1" in check.explain()


def test_unequal_totals_are_incomparable():
    check = majorizes((1, 1), (0.5, 0.5))
    assert check.outcome == "incomparable-totals" and not check


def test_relative_total_tolerance():
    assert majorizes((0.6, 0.4), (0.5, 0.5 + 1e-14))
    assert not majorizes((0.6, 0.4), (0.5, 0.5 + 1e-9)).totals_equal


def test_permutation_holds_but_not_strict():
    check = majorizes((0.2, 0.3, 0.5), (0.5, 0.2, 0.3))
    assert check and not check.strict


def test_length_mismatch():
    with pytest.raises(DimensionError):
        majorizes((1, 0), (1, 0, 0))


def test_weight_vector_parsing_and_validation():
    assert WeightVector.parse("0.5, 0.5").weights == (0.5, 0.5)
    assert WeightVector.uniform(4, 2.0).weights == (0.5,) * 4
    assert WeightVector.concentrated(3).weights == (1.0, 0.0, 0.0)
    for bad in ("a,b", ""):
        with pytest.raises(DomainError):
            WeightVector.parse(bad)
    with pytest.raises(DomainError):
        WeightVector((-0.1, 1.1))


def test_t_transform_bounds():
    with pytest.raises(DomainError):
        TTransform(0, 1, 1.5)
    with pytest.raises(DomainError):
        TTransform(1, 1, 0.5)
    assert np.allclose(TTransform(0, 1, 0.75).apply([1.0, 0.0]), [0.75, 0.25])


@given(seeds, dims)
def test_every_chain_step_preserves_order_and_total(seed, n):
    rng = np.random.default_rng(seed)
    eta, theta = random_majorizing_pair(n, rng)
    assert majorizes(eta, theta)
    chain = t_transform_chain(eta, theta)
    assert len(chain) <= n - 1
    path = apply_chain(eta.as_array(), chain)
    for a, b in zip(path, path[1:]):
        assert abs(a.sum() - b.sum()) < 1e-12
        assert majorizes(a, b)
    assert np.allclose(np.sort(path[-1]), np.sort(theta.as_array()), atol=1e-9)


@given(seeds, dims)
def test_concentrated_to_uniform_chain(seed, n):
    rng = np.random.default_rng(seed)
    eta = rng.dirichlet(np.ones(n))
    chain = t_transform_chain(eta, np.full(n, eta.sum() / n))
    assert np.allclose(apply_chain(eta, chain)[-1], eta.sum() / n, atol=1e-9)


def test_chain_refuses_non_majorized_pair():
    with pytest.raises(OrderError):
        t_transform_chain((0.5, 0.5), (1, 0))


def test_chain_of_equal_vectors_is_empty():
    assert t_transform_chain((0.3, 0.7), (0.7, 0.3)) == []


def test_chain_indices_refer_to_original_positions():
    eta = (0.1, 0.6, 0.3)
    chain = t_transform_chain(eta, (0.2, 0.4, 0.4))
    end = apply_chain(eta, chain)[-1]
    # the largest entry of eta sits at index 1 and must shrink
    assert end[1] < 0.6
    assert np.allclose(np.sort(end), [0.2, 0.4, 0.4])


@settings(max_examples=50)
@given(seeds, dims)
def test_random_pairs_are_strict(seed, n):
    eta, theta = random_majorizing_pair(n, np.random.default_rng(seed))
    assert majorizes(eta, theta).strict
