import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import gaussian
from oracles import naive_correlate, normal_equations_ls, top_k_full_sort
from pursuitlab.linalg import (
    correlate,
    hard_threshold,
    index_set,
    restricted_least_squares,
    top_k_indices,
)


def test_top_k_tie_goes_to_lower_index():
    assert top_k_indices(np.array([3.0, -5.0, 0.0, 5.0]), 2).tolist() == [1, 3]


def test_top_k_unique_maximum():
    assert top_k_indices(np.array([0.0, 0.0, 0.0, 7.0]), 1).tolist() == [3]


def test_top_k_seeded_uniform_matches_full_sort():
    v = np.random.default_rng(100).uniform(-1, 1, 100)
    assert np.array_equal(top_k_indices(v, 10), top_k_full_sort(v, 10))


@pytest.mark.parametrize("k", [0, -1, 5])
def test_top_k_rejects_bad_k(k):
    with pytest.raises(ValueError):
        top_k_indices(np.ones(4), k)


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e6, 1e6)), st.data())
@settings(max_examples=200, deadline=None)
def test_top_k_partition_property(v, data):
    k = data.draw(st.integers(1, v.shape[0]))
    idx = top_k_indices(v, k)
    assert idx.shape[0] == k and np.all(np.diff(idx) > 0)
    rest = np.setdiff1d(np.arange(v.shape[0]), idx)
    if rest.size:
        assert np.abs(v[idx]).min() >= np.abs(v[rest]).max()


def test_ls_identity_copies_y_on_support():
    y = np.array([1.0, -2.0, 3.0, 4.0, 5.0])
    sol = restricted_least_squares(np.eye(5), y, [1, 3])
    assert sol.estimate.tolist() == [0.0, -2.0, 0.0, 4.0, 0.0]
    assert not sol.rank_deficient


def test_ls_recovers_known_coefficients():
    phi = gaussian(np.random.default_rng(4), 4, 6)
    x = np.zeros(6)
    x[0], x[2] = 1.0, -2.0
    sol = restricted_least_squares(phi, phi @ x, [0, 2])
    np.testing.assert_allclose(sol.estimate, x, atol=1e-10)


def test_ls_duplicate_columns_flagged_and_orthogonal():
    rng = np.random.default_rng(5)
    phi = gaussian(rng, 6, 8)
    phi[:, 4] = phi[:, 1]
    y = rng.standard_normal(6)
    sol = restricted_least_squares(phi, y, [1, 4, 6])
    assert sol.rank_deficient
    a = phi[:, [1, 4, 6]]
    assert np.abs(a.T @ sol.residual).max() <= 1e-10 * np.linalg.norm(y) * np.linalg.norm(a, axis=0).max()
    # minimum-norm: the duplicated pair shares its weight equally
    assert sol.estimate[1] == pytest.approx(sol.estimate[4], rel=1e-9)


def test_ls_invariants_random(rng):
    for _ in range(50):
        m, n = 40, 90
        phi = gaussian(rng, m, n)
        y = rng.standard_normal(m)
        T = np.sort(rng.choice(n, rng.integers(1, 30), replace=False))
        sol = restricted_least_squares(phi, y, T)
        outside = np.setdiff1d(np.arange(n), T)
        assert np.all(sol.estimate[outside] == 0)
        np.testing.assert_allclose(sol.residual, y - phi @ sol.estimate,
                                   atol=1e-12 * np.linalg.norm(y))
        colmax = np.linalg.norm(phi[:, T], axis=0).max()
        assert np.abs(phi[:, T].T @ sol.residual).max() <= 1e-10 * np.linalg.norm(y) * colmax
        assert sol.orthogonality <= 1e-10
        ref = normal_equations_ls(phi, y, T)
        np.testing.assert_allclose(sol.estimate, ref, rtol=1e-8,
                                   atol=1e-8 * np.abs(ref).max())


def test_ls_bit_identical_repeat(rng):
    phi = gaussian(rng, 20, 50)
    y = rng.standard_normal(20)
    a = restricted_least_squares(phi, y, [3, 7, 11])
    b = restricted_least_squares(phi, y, [3, 7, 11])
    assert a.estimate.tobytes() == b.estimate.tobytes()
    assert a.residual.tobytes() == b.residual.tobytes()


def test_ls_errors():
    phi = np.ones((2, 4))
    with pytest.raises(ValueError):
        restricted_least_squares(phi, np.ones(2), [])
    with pytest.raises(ValueError):
        restricted_least_squares(phi, np.ones(2), [0, 1, 2])


def test_correlate_examples():
    r = np.array([1.0, -2.0, 0.5])
    assert correlate(np.eye(3), r).tolist() == r.tolist()
    assert correlate(np.ones((2, 3)), np.ones(2)).tolist() == [2.0, 2.0, 2.0]
    rng = np.random.default_rng(58)
    phi, r = rng.standard_normal((5, 8)), rng.standard_normal(5)
    np.testing.assert_allclose(correlate(phi, r), naive_correlate(phi, r), atol=1e-13)


def test_correlate_dimension_mismatch():
    with pytest.raises(ValueError):
        correlate(np.ones((3, 4)), np.ones(4))


def test_index_set_and_hard_threshold():
    assert index_set([4, 1, 4, 2], 5).tolist() == [1, 2, 4]
    with pytest.raises(ValueError):
        index_set([5], 5)
    out, idx = hard_threshold(np.array([0.5, -3.0, 2.0]), 1)
    assert idx.tolist() == [1] and out.tolist() == [0.0, -3.0, 0.0]
