import itertools
from math import comb, prod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syl.errors import DomainError
from syl.symmetric import (
    BOUNDARY,
    INTERIOR,
    OUTSIDE,
    MAX_DIM,
    classify_cone,
    sigma,
    sigma_of_multiset,
    sigmas,
)

floats = st.floats(-10, 10, allow_nan=False)
vectors = st.lists(floats, min_size=1, max_size=8)


def sigma_by_subsets(lam, k):
    return sum(prod(c) for c in itertools.combinations(lam, k))


def sigmas_by_newton(lam, k):
    """Newton's identities from power sums: j e_j = sum_i (-1)^(i-1) e_(j-i) p_i."""
    p = [sum(x**i for x in lam) for i in range(k + 1)]
    e = [1.0]
    for j in range(1, k + 1):
        e.append(sum((-1) ** (i - 1) * e[j - i] * p[i] for i in range(1, j + 1)) / j)
    return e


@given(vectors, st.data())
def test_matches_subset_enumeration(lam, data):
    k = data.draw(st.integers(0, len(lam)))
    expected = sigma_by_subsets(lam, k)
    scale = max(1.0, sigma_by_subsets([abs(x) for x in lam], k))
    assert abs(sigma(lam, k) - expected) <= 1e-12 * scale


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=6))
def test_matches_newton_identities(lam):
    k = len(lam)
    got = sigmas(lam, k)
    ref = sigmas_by_newton(lam, k)
    np.testing.assert_allclose(got, ref, atol=1e-9)


@given(vectors, st.data())
def test_permutation_invariant_and_homogeneous(lam, data):
    k = data.draw(st.integers(0, len(lam)))
    t = data.draw(st.floats(-3, 3))
    perm = data.draw(st.permutations(lam))
    scale = max(1.0, sigma_by_subsets([abs(x) for x in lam], k)) * max(1.0, abs(t)) ** k
    assert abs(sigma(perm, k) - sigma(lam, k)) <= 1e-12 * scale
    assert abs(sigma(np.multiply(t, lam), k) - t**k * sigma(lam, k)) <= 1e-11 * scale


def test_known_values():
    assert sigma([1.0] * 6, 3) == comb(6, 3)
    assert sigma([2.0, 3.0, 5.0], 3) == 30.0
    assert sigma([2.0, 3.0, 5.0], 0) == 1.0
    np.testing.assert_array_equal(sigmas([1.0, 2.0], 2), [1.0, 3.0, 2.0])


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(2, 9), st.data())
def test_multiset_formula(mu_r, mu_t, n, data):
    k = data.draw(st.integers(1, n))
    lam = [mu_r] + [mu_t] * (n - 1)
    scale = max(1.0, sigma_by_subsets([abs(mu_r)] + [abs(mu_t)] * (n - 1), k))
    assert abs(sigma_of_multiset(mu_r, mu_t, n, k) - sigma(lam, k)) <= 1e-11 * scale


def test_domain_errors():
    with pytest.raises(DomainError):
        sigma([1.0] * (MAX_DIM + 1), 1)
    with pytest.raises(DomainError):
        sigma([], 0)
    with pytest.raises(DomainError):
        sigma([1.0, np.nan], 1)
    with pytest.raises(DomainError):
        sigma([1.0, 2.0], 3)
    with pytest.raises(DomainError):
        sigma_of_multiset(1.0, 1.0, 1, 1)


def test_classification_labels():
    c = classify_cone([1.0, 2.0, 3.0], 3)
    assert c.label == INTERIOR and c.interior and c.witness is None
    c = classify_cone([1.0, 0.0, 0.0], 2)
    assert c.label == BOUNDARY and c.witness == 2 and c.closure
    c = classify_cone([-1.0, -1.0, 0.5], 2)
    assert c.label == OUTSIDE and c.witness == 1 and not c.closure
    # sigma_1 > 0 but sigma_2 < 0
    c = classify_cone([3.0, -1.0, -1.0], 2)
    assert c.label == OUTSIDE and c.witness == 2
    with pytest.raises(DomainError):
        classify_cone([1.0], 1, tol=0.0)


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=8), st.data())
def test_positive_vectors_are_interior(lam, data):
    k = data.draw(st.integers(1, len(lam)))
    assert classify_cone(lam, k).interior


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.data())
def test_cone_is_nested(lam, data):
    k = data.draw(st.integers(2, len(lam)))
    if classify_cone(lam, k).interior:
        assert classify_cone(lam, k - 1).interior
