"""Fixed-size 4x4 linear algebra for the symmetry reduction.

All matrices are plain ``numpy`` arrays of shape (4, 4) or (2, 2).  The
structure/symmetry matrices are integer-valued and exact; comparisons of
numerically computed matrices always take an explicit tolerance.
"""
import numpy as np

from .errors import BlockStructureError, SingularMatrixError

DEFAULT_TOL = 1e-9

_I2 = np.eye(2)
_Z2 = np.zeros((2, 2))

J = np.block([[_Z2, _I2], [-_I2, _Z2]])
S_COLLINEAR = np.diag([1.0, -1.0, -1.0, 1.0])
LAMBDA = np.diag([1.0, 1.0, -1.0, -1.0])
S_F = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])
S_G = np.diag([-1.0, 1.0, 1.0, -1.0])
Q_PLANAR = S_F.T @ S_G

_CONSTANTS = {
    "J": J,
    "S_collinear": S_COLLINEAR,
    "Lambda": LAMBDA,
    "S_F": S_F,
    "S_G": S_G,
    "Q_planar": Q_PLANAR,
}

for _m in _CONSTANTS.values():
    _m.setflags(write=False)


def constant(name):
    """Return a copy of one of the named structure matrices.

    Parameters
    ----------
    name : {"J", "S_collinear", "Lambda", "S_F", "S_G", "Q_planar"}
    """
    try:
        return _CONSTANTS[name].copy()
    except KeyError:
        raise ValueError(f"unknown constant {name!r}; expected one of {sorted(_CONSTANTS)}") from None


def _maxnorm(a):
    return float(np.max(np.abs(a)))


def symplectic_defect(M):
    """Max-norm of ``M^T J M - J``."""
    M = np.asarray(M, dtype=float)
    return _maxnorm(M.T @ J @ M - J)


def is_symplectic(M, tol=DEFAULT_TOL):
    return symplectic_defect(M) < tol


def anti_symplectic_multiplier(M, tol=DEFAULT_TOL):
    """True when ``M`` is symplectic with multiplier -1 (``M^T J M = -J``)."""
    M = np.asarray(M, dtype=float)
    return _maxnorm(M.T @ J @ M + J) < tol


def half_sum_inverse(W):
    """``(W + W^-1) / 2``; raises :class:`SingularMatrixError` if ``W`` is
    numerically singular."""
    W = np.asarray(W, dtype=float)
    if not np.all(np.isfinite(W)) or np.linalg.cond(W) > 1.0 / np.finfo(float).eps:
        raise SingularMatrixError("W is not invertible to working precision")
    return 0.5 * (W + np.linalg.inv(W))


def off_block_norm(M):
    """Max-norm of the two off-diagonal 2x2 blocks of a 4x4 matrix."""
    M = np.asarray(M)
    return max(_maxnorm(M[:2, 2:]), _maxnorm(M[2:, :2]))


def k_block(W, tol=DEFAULT_TOL):
    """Extract ``K`` from ``(W + W^-1)/2 = [[K^T, 0], [0, K]]``.

    Raises
    ------
    BlockStructureError
        If the off-diagonal blocks are not below ``tol``.  In practice this
        means the basis ``Y0`` was built wrong or the integration failed.
    SingularMatrixError
        If ``W`` cannot be inverted.
    """
    M = half_sum_inverse(W)
    off = off_block_norm(M)
    if not off < tol:
        raise BlockStructureError(f"off-diagonal block norm {off:.3e} exceeds {tol:.1e}")
    return M[2:, 2:].copy()


def k_eigenvalues(K):
    """Eigenvalues of a real 2x2 matrix as a (possibly complex) pair."""
    K = np.asarray(K, dtype=float)
    half_tr = 0.5 * (K[0, 0] + K[1, 1])
    det = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
    disc = half_tr * half_tr - det
    if disc >= 0.0:
        r = np.sqrt(disc)
        return half_tr - r, half_tr + r
    r = 1j * np.sqrt(-disc)
    return half_tr - r, half_tr + r


def k_block_stable(K, tol=DEFAULT_TOL):
    """Stability test on the reduced block: ``W`` is stable iff both
    eigenvalues of ``K`` are real with modulus at most one.

    The boundary |lambda| = 1 counts as stable.  A discriminant within
    ``tol`` of zero is treated as a (double) real root.
    """
    K = np.asarray(K, dtype=float)
    half_tr = 0.5 * (K[0, 0] + K[1, 1])
    det = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
    disc = half_tr * half_tr - det
    if disc < -tol:
        return False
    r = np.sqrt(max(disc, 0.0))
    return bool(abs(half_tr - r) <= 1.0 + tol and abs(half_tr + r) <= 1.0 + tol)


def char_poly(M):
    """Monic characteristic polynomial coefficients (highest degree first)."""
    return np.poly(np.asarray(M, dtype=float))


def palindromic_defect(M):
    """For a 4x4 symplectic matrix the characteristic polynomial is
    palindromic (eigenvalues in reciprocal pairs); return the max
    coefficient mismatch, relative to the largest coefficient."""
    c = char_poly(M).real
    scale = max(1.0, float(np.max(np.abs(c))))
    return float(np.max(np.abs(c - c[::-1]))) / scale
