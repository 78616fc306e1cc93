import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sbcstab import symplectic4 as sp
from sbcstab.errors import BlockStructureError, SingularMatrixError


def test_constants_exact():
    J = sp.constant("J")
    assert np.array_equal(J @ J, -np.eye(4))
    assert np.array_equal(J.T, -J)
    S = sp.constant("S_collinear")
    assert np.array_equal(S @ J, -J @ S)
    assert np.array_equal(sp.S_G @ J, -J @ sp.S_G)
    assert np.array_equal(sp.S_F @ J, J @ sp.S_F)
    assert np.array_equal(sp.Q_PLANAR, sp.S_F.T @ sp.S_G)


def test_constant_is_a_copy_and_originals_read_only():
    J = sp.constant("J")
    J[0, 0] = 5.0
    assert sp.J[0, 0] == 0.0
    with pytest.raises(ValueError):
        sp.J[0, 0] = 1.0


def test_unknown_constant():
    with pytest.raises(ValueError):
        sp.constant("nope")


def test_symplectic_checks():
    assert sp.is_symplectic(np.eye(4))
    assert sp.is_symplectic(sp.J)
    assert not sp.is_symplectic(2 * np.eye(4))
    assert sp.anti_symplectic_multiplier(sp.S_COLLINEAR)
    assert not sp.anti_symplectic_multiplier(np.eye(4))


def _random_symplectic(rng):
    # exp(J H) with H symmetric is symplectic
    from scipy.linalg import expm
    H = rng.normal(size=(4, 4))
    return expm(sp.J @ (H + H.T) * 0.3)


def test_random_symplectic_defect_small(rng):
    for _ in range(20):
        assert sp.symplectic_defect(_random_symplectic(rng)) < 1e-12


def test_half_sum_inverse_singular():
    with pytest.raises(SingularMatrixError):
        sp.half_sum_inverse(np.zeros((4, 4)))


def test_k_block_extracts_lower_right():
    W = np.diag([2.0, 0.5, 4.0, 0.5])
    assert np.allclose(sp.k_block(W), np.diag([2.125, 1.25]))


def test_k_block_rejects_coupled_blocks(rng):
    W = 3.0 * np.eye(4) + rng.normal(size=(4, 4))
    with pytest.raises(BlockStructureError):
        sp.k_block(W)


@pytest.mark.parametrize("K,expected", [
    (np.array([[-1.0, 0.2], [0.0, 0.6]]), True),
    (np.array([[-1.0, 0.2], [0.0, 1.0]]), True),     # boundary counts as stable
    (np.array([[-1.0, 0.2], [0.0, 1.05]]), False),
    (np.array([[1.0, 9.2], [0.0, -0.68]]), True),
    (np.array([[0.0, -1.0], [1.0, 0.0]]), False),    # complex eigenvalues
    (np.array([[0.5, 0.0], [0.0, -1.2]]), False),
])
def test_k_block_stable(K, expected):
    assert sp.k_block_stable(K) is expected


def test_k_eigenvalues_real_and_complex():
    lo, hi = sp.k_eigenvalues(np.array([[-1.0, 3.0], [0.0, 0.5]]))
    assert (lo, hi) == pytest.approx((-1.0, 0.5))
    a, b = sp.k_eigenvalues(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert abs(a.imag) == pytest.approx(1.0)


def test_palindromic_for_symplectic(rng):
    M = _random_symplectic(rng)
    assert sp.palindromic_defect(M) < 1e-10
    assert sp.palindromic_defect(np.diag([2.0, 3.0, 1.0, 1.0])) > 0.1


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-2, 2)),
       arrays(np.float64, (4, 4), elements=st.floats(-2, 2)))
def test_property_symplectic_product_closed(H1, H2):
    from scipy.linalg import expm
    A = expm(sp.J @ (H1 + H1.T) * 0.2)
    B = expm(sp.J @ (H2 + H2.T) * 0.2)
    P = A @ B
    assert sp.symplectic_defect(P) < 1e-10 * max(1.0, np.abs(P).max() ** 2)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_property_off_block_norm_of_block_diagonal(A):
    M = A.copy()
    M[:2, 2:] = 0
    M[2:, :2] = 0
    assert sp.off_block_norm(M) == 0.0
    assert sp.off_block_norm(A) == np.abs(np.concatenate([A[:2, 2:], A[2:, :2]])).max()


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_property_k_block_stable_matches_eigenvalues(a, b, c):
    K = np.array([[a, b], [0.0, c]])
    expected = abs(a) <= 1 + 1e-9 and abs(c) <= 1 + 1e-9
    assert sp.k_block_stable(K) == expected
