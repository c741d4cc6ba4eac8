"""Closed-form information quantities against exact combinatorics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskchannel.errors import InvalidArgumentError
from maskchannel.information import (InfoBudget, RESOLUTION_SEARCH_CAP, capacity_envelope,
                                     critical_resolution, dense_query_lower_bound,
                                     explanation_rate, info_budget, per_query_mi_gaussian,
                                     sparse_query_lower_bound, support_entropy)

# frozen independently of the library: math.log2(math.comb(d, k))
LOG2_C_12_2 = 6.044394119358453        # log2(66)
LOG2_C_40_3 = 13.27029532647204        # log2(9880)
LOG2_C_64_9 = 34.680840127940364       # log2(27540584512)


def test_entropy_frozen_values():
    assert support_entropy(12, 2) == pytest.approx(LOG2_C_12_2, abs=1e-9)
    assert support_entropy(40, 3) == pytest.approx(LOG2_C_40_3, abs=1e-9)
    assert support_entropy(64, 9) == pytest.approx(LOG2_C_64_9, abs=1e-9)


def test_entropy_matches_exact_binomial_coefficients():
    for d in range(0, 26):
        for k in range(0, d + 1):
            assert support_entropy(d, k) == pytest.approx(
                math.log2(math.comb(d, k)), rel=1e-12, abs=1e-12)


def test_entropy_special_cases_exact():
    # k in {0, d} is exactly zero, k in {1, d-1} exactly log2(d)
    assert support_entropy(17, 0) == 0.0
    assert support_entropy(17, 17) == 0.0
    assert support_entropy(1024, 1) == 10.0
    assert support_entropy(1024, 1023) == 10.0


@given(st.integers(min_value=0, max_value=10_000))
def test_entropy_symmetry(d):
    k = d // 3
    assert support_entropy(d, k) == support_entropy(d, d - k)


def test_entropy_monotone_in_d_up_to_1e4():
    # more items to hide among -> strictly more bits (k fixed, d > k)
    ds = np.arange(6, 10_001)
    h = np.array([support_entropy(int(d), 5) for d in ds])
    assert (np.diff(h) > 0).all()


def test_entropy_unimodal_in_k():
    h = [support_entropy(30, k) for k in range(31)]
    peak = int(np.argmax(h))
    assert peak == 15
    assert all(h[i] < h[i + 1] for i in range(peak))
    assert all(h[i] > h[i + 1] for i in range(peak, 30))


def test_entropy_validation():
    with pytest.raises(InvalidArgumentError):
        support_entropy(-1, 0)
    with pytest.raises(InvalidArgumentError):
        support_entropy(5, 6)


def test_capacity_envelope_frozen():
    # 0.5 * log2(1 + p k / sigma^2) at the achievability configuration
    assert capacity_envelope(2, 0.1, 0.5) == pytest.approx(3.3291057413758973, abs=1e-12)
    assert capacity_envelope(3, 1.0, 0.5) == pytest.approx(0.6609640474436812, abs=1e-12)


def test_per_query_mi_gaussian_zero_signal():
    assert per_query_mi_gaussian(0.0, 0.3) == 0.0


def test_envelope_monotone_in_noise():
    cs = [capacity_envelope(2, s, 0.5) for s in (0.05, 0.1, 0.5, 1.0, 4.0)]
    assert all(a > b for a, b in zip(cs, cs[1:]))
    with pytest.raises(InvalidArgumentError):
        capacity_envelope(2, 0.0, 0.5)
    with pytest.raises(InvalidArgumentError):
        capacity_envelope(2, 0.1, 1.0)


def test_query_lower_bounds():
    c = capacity_envelope(2, 0.1, 0.5)
    sparse = sparse_query_lower_bound(12, 2, c)
    assert sparse == pytest.approx((2.0 / c) * math.log2(6.0), rel=1e-12)
    dense = dense_query_lower_bound(12, c, 8.0)
    assert dense == pytest.approx(12 * 8.0 / c, rel=1e-12)
    # the sparse task needs far fewer queries than amplitude estimation
    assert sparse < dense
    with pytest.raises(InvalidArgumentError):
        sparse_query_lower_bound(12, 0, c)
    with pytest.raises(InvalidArgumentError):
        dense_query_lower_bound(12, c, 0.0)


def test_explanation_rate():
    assert explanation_rate(10.0, 4) == 2.5
    with pytest.raises(InvalidArgumentError):
        explanation_rate(10.0, 0)


def _brute_critical_resolution(budget_bits: float, k: int) -> int:
    d = k
    while math.log2(math.comb(d + 1, k)) <= budget_bits:
        d += 1
    return d


def test_critical_resolution_matches_brute_force():
    for t, k, c in [(1, 1, 1.0), (10, 2, 0.7), (25, 3, 1.3), (4, 5, 0.25), (60, 8, 1.1)]:
        assert critical_resolution(t, k, c) == _brute_critical_resolution(t * c, k)


def test_critical_resolution_boundary_is_inclusive():
    # a budget of exactly H(8, 2) admits d = 8, not 7
    budget = support_entropy(8, 2)
    assert critical_resolution(1, 2, budget) == 8


def test_critical_resolution_zero_budget():
    assert critical_resolution(0, 3, 1.0) == 3  # only the trivial d = k fits


def test_critical_resolution_refuses_absurd_budgets():
    with pytest.raises(InvalidArgumentError, match="refusing"):
        critical_resolution(10**6, 1, 100.0)
    assert RESOLUTION_SEARCH_CAP == 10**15


def test_info_budget_consistency():
    b = info_budget(12, 2, 25, 0.1, 0.5)
    assert b.entropy_bits == support_entropy(12, 2)
    assert b.rate_bits_per_query * b.query_count == pytest.approx(b.entropy_bits, rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        InfoBudget(entropy_bits=4.0, rate_bits_per_query=1.0,
                   capacity_bound_bits=1.0, query_count=3)


@settings(max_examples=25)
@given(st.integers(min_value=1, max_value=400), st.integers(min_value=0, max_value=400))
def test_entropy_never_negative_and_bounded(d, k):
    if k > d:
        return
    h = support_entropy(d, k)
    assert 0.0 <= h <= d  # C(d, k) <= 2^d
