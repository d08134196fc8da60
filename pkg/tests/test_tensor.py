import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drisce.errors import ColumnMismatch, InvalidMode, RankMismatch, ShapeMismatch
from drisce.tensor import cp3, fold, hstack, khatri_rao, kron, unfold, unvec, vec, vstack

from conftest import cmat, rel_err


def cp_loop(a, b, c):
    out = np.zeros((a.shape[0], b.shape[0], c.shape[0]), dtype=complex)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            for k in range(c.shape[0]):
                out[i, j, k] = sum(a[i, r] * b[j, r] * c[k, r] for r in range(a.shape[1]))
    return out


def test_kron_identity():
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_hand_block():
    np.testing.assert_array_equal(kron([[1, 2]], [[3], [4]]), [[3, 6], [4, 8]])


def test_kron_of_vectors_is_vec_of_outer(rng):
    a, b = cmat(rng, 3, 1), cmat(rng, 3, 1)
    np.testing.assert_allclose(kron(a, b), vec(b @ a.T), rtol=0, atol=1e-15)


def test_khatri_rao_identity_columns():
    e = np.eye(2)
    expected = np.column_stack([np.kron(e[:, 0], e[:, 0]), np.kron(e[:, 1], e[:, 1])])
    np.testing.assert_array_equal(khatri_rao(e, e), expected)


def test_khatri_rao_columns_are_kron(rng):
    a, b = cmat(rng, 3, 2), cmat(rng, 4, 2)
    kr = khatri_rao(a, b)
    assert kr.shape == (12, 2)
    for r in range(2):
        np.testing.assert_array_equal(kr[:, r], np.kron(a[:, r], b[:, r]))


def test_khatri_rao_estimator_factor_shape(rng):
    theta, g_t = cmat(rng, 30, 30), cmat(rng, 2, 30)
    assert khatri_rao(theta, g_t).shape == (60, 30)


def test_khatri_rao_column_mismatch():
    with pytest.raises(ColumnMismatch):
        khatri_rao(np.ones((2, 3)), np.ones((2, 2)))


def test_vec_column_major():
    np.testing.assert_array_equal(vec([[1, 3], [2, 4]]).ravel(), [1, 2, 3, 4])


def test_vec_unvec_round_trip(rng):
    a = cmat(rng, 5, 7)
    np.testing.assert_array_equal(unvec(vec(a), 5, 7), a)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_unfold_matches_cp_closed_forms(rng, mode):
    a, b, c = cmat(rng, 4, 3), cmat(rng, 5, 3), cmat(rng, 2, 3)
    t = cp_loop(a, b, c)
    closed = {
        1: a @ khatri_rao(c, b).T,
        2: b @ khatri_rao(c, a).T,
        3: c @ khatri_rao(b, a).T,
    }[mode]
    assert rel_err(unfold(t, mode), closed) <= 1e-12


def test_ris1_tensor_mode2_shape(rng):
    t = cmat(rng, 4 * 2 * 30, 1).reshape(4, 2, 30)
    assert unfold(t, 2).shape == (2, 30 * 4)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_fold_inverts_unfold_exactly(rng, mode):
    t = cmat(rng, 3 * 4 * 5, 1).reshape(3, 4, 5)
    np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)


def test_fold_zeros():
    assert not np.any(fold(np.zeros((3, 20)), 1, (3, 4, 5)))


def test_fold_of_closed_form_is_cp(rng):
    a, b, c = cmat(rng, 3, 2), cmat(rng, 4, 2), cmat(rng, 5, 2)
    t = fold(a @ khatri_rao(c, b).T, 1, (3, 4, 5))
    assert rel_err(t, cp_loop(a, b, c)) <= 1e-13


def test_fold_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        fold(np.zeros((3, 19)), 1, (3, 4, 5))


def test_invalid_mode():
    with pytest.raises(InvalidMode):
        unfold(np.zeros((2, 2, 2)), 4)


def test_cp3_rank_one_unit():
    e = np.eye(3)[:, :1]
    t = cp3(e, e, e)
    assert t[0, 0, 0] == 1 and np.count_nonzero(t) == 1


def test_cp3_matches_triple_loop(rng):
    a, b, c = cmat(rng, 4, 3), cmat(rng, 3, 3), cmat(rng, 5, 3)
    assert rel_err(cp3(a, b, c), cp_loop(a, b, c)) <= 1e-13


def test_cp3_system_shape(rng):
    assert cp3(cmat(rng, 4, 30), cmat(rng, 2, 30), cmat(rng, 30, 30)).shape == (4, 2, 30)


def test_cp3_rank_mismatch():
    with pytest.raises(RankMismatch):
        cp3(np.ones((2, 2)), np.ones((2, 3)), np.ones((2, 2)))


def test_vstack_sigma_shape(rng):
    h1, u = cmat(rng, 4, 8), cmat(rng, 6 * 4, 8)
    assert vstack([h1, u]).shape == (7 * 4, 8)


def test_stacks_preserve_blocks(rng):
    blocks = [cmat(rng, 2, 3), cmat(rng, 4, 3)]
    s = vstack(blocks)
    np.testing.assert_array_equal(s[:2], blocks[0])
    np.testing.assert_array_equal(s[2:], blocks[1])
    np.testing.assert_array_equal(hstack([blocks[0]]), blocks[0])
    with pytest.raises(ShapeMismatch):
        hstack(blocks)


dims_st = st.integers(min_value=1, max_value=5)


@settings(max_examples=40, deadline=None)
@given(dims_st, dims_st, dims_st, dims_st, st.integers(0, 2**32 - 1))
def test_unfold_closed_forms_property(i, j, k, r, seed):
    rng = np.random.default_rng(seed)
    a, b, c = cmat(rng, i, r), cmat(rng, j, r), cmat(rng, k, r)
    t = cp3(a, b, c)
    for mode, closed in ((1, a @ khatri_rao(c, b).T), (2, b @ khatri_rao(c, a).T), (3, c @ khatri_rao(b, a).T)):
        assert rel_err(unfold(t, mode), closed) <= 1e-12
        np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)


@settings(max_examples=40, deadline=None)
@given(dims_st, dims_st, st.integers(0, 2**32 - 1))
def test_kron_vec_identity_property(m, n, seed):
    rng = np.random.default_rng(seed)
    a, b = cmat(rng, m, 1), cmat(rng, n, 1)
    np.testing.assert_allclose(kron(a, b), vec(b @ a.T), rtol=0, atol=1e-14)
