import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecko.multtest import bhq_qvalues, quantile_aggregate, threshold_select


def step_up(p, alpha):
    """Largest k with p_(k) <= k alpha / m, in exact arithmetic; reject the k smallest."""
    m = len(p)
    order = np.argsort(p, kind="stable")
    k = 0
    for i in range(1, m + 1):
        if Fraction(float(p[order[i - 1]])) * m <= Fraction(float(alpha)) * i:
            k = i
    return set(order[:k].tolist()) if k else set()


def test_aggregate_examples():
    col = np.array([[0.02], [0.04], [0.10]])
    assert quantile_aggregate(col, 0.5)[0] == pytest.approx(0.08)
    assert quantile_aggregate(np.full((5, 2), 0.05), 0.5) == pytest.approx([0.1, 0.1])
    assert quantile_aggregate(np.array([[0.5], [0.6], [0.9]]), 0.5)[0] == 1.0


def test_aggregate_rejects_bad_input():
    with pytest.raises(ValueError):
        quantile_aggregate(np.full((3, 2), 0.5), 1.0)
    with pytest.raises(ValueError):
        quantile_aggregate(np.full((3, 2), 1.5), 0.5)


def test_aggregate_is_lower_order_statistic(rng):
    P = rng.random((8, 30))
    for gamma in (0.1, 0.25, 0.5, 0.9):
        k = int(np.ceil(gamma * 8))
        expect = np.minimum(1, np.sort(P, axis=0)[k - 1] / gamma)
        np.testing.assert_array_equal(quantile_aggregate(P, gamma), expect)


def test_bhq_examples():
    np.testing.assert_allclose(bhq_qvalues([0.01, 0.02, 0.5]), [0.03, 0.03, 0.5])
    np.testing.assert_array_equal(bhq_qvalues([1, 1, 1]), [1, 1, 1])
    np.testing.assert_array_equal(bhq_qvalues([0.05]), [0.05])
    with pytest.raises(ValueError):
        bhq_qvalues([0.1, 1.2])


def test_threshold_examples():
    assert threshold_select([0.05, 0.2, 0.1], 0.1).tolist() == [0, 2]
    assert threshold_select([1, 1], 0.1).tolist() == []
    assert threshold_select([0.1], 0.1).tolist() == [0]


def test_bhq_matches_exhaustive_step_up_on_ties():
    # all vectors over a small value set, ties included
    values = [0.0, 0.01, 0.03, 0.05, 0.2, 1.0]
    for m in range(1, 5):
        for p in itertools.product(values, repeat=m):
            p = np.array(p)
            q = bhq_qvalues(p)
            for alpha in (0.01, 0.05, 0.1, 0.2):
                assert set(threshold_select(q, alpha).tolist()) == step_up(p, alpha)


@settings(max_examples=300)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.floats(0.001, 0.999))
def test_bhq_property(p, alpha):
    p = np.array(p)
    q = bhq_qvalues(p)
    assert np.all((q >= p) & (q <= 1))
    assert set(threshold_select(q, alpha).tolist()) == step_up(p, alpha)
