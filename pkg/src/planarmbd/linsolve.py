"""Dense linear-algebra kernels: rank-revealing null spaces, minimal-norm
least-squares solves and generalized symmetric eigenvalues.

Everything is backed by one SVD per matrix so that null-space extraction and
pseudoinverse solves of the same matrix (and of its transpose) share the
factorization.
"""

import numpy as np
import scipy.linalg

from .errors import SingularMassError

DEFAULT_RANK_TOL = 1e-10


def _as_finite_matrix(a, name="matrix"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.size and not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _as_finite_vector(b, name="vector"):
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {b.shape}")
    if b.size and not np.isfinite(b).all():
        raise ValueError(f"{name} contains non-finite entries")
    return b


class SvdSolver:
    """Shared SVD factorization of an m-by-n matrix.

    Provides the orthonormal null-space basis, minimal-norm least-squares
    solves with the matrix and with its transpose, all with one rank
    decision: singular values below ``rank_tol`` times the largest one are
    treated as zero.
    """

    def __init__(self, a, rank_tol=DEFAULT_RANK_TOL):
        if not 0.0 < rank_tol < 1.0:
            raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
        a = _as_finite_matrix(a)
        self.shape = a.shape
        m, n = a.shape
        if a.size == 0:
            self._u = np.eye(m)
            self._s = np.zeros(0)
            self._vt = np.eye(n)
        else:
            self._u, self._s, self._vt = np.linalg.svd(a, full_matrices=True)
        if self._s.size:
            cutoff = rank_tol * self._s[0]
            self.rank = int(np.count_nonzero(self._s > cutoff))
        else:
            self.rank = 0

    @property
    def null_space(self):
        """Orthonormal basis (n x k) of directions v with A v = 0."""
        return self._vt[self.rank:].T.copy()

    def _apply_pinv(self, u, vt, b):
        r = self.rank
        if r == 0:
            shape = (vt.shape[1],) if b.ndim == 1 else (vt.shape[1], b.shape[1])
            return np.zeros(shape)
        core = u[:, :r].T @ b
        core /= self._s[:r] if b.ndim == 1 else self._s[:r, None]
        return vt[:r].T @ core

    def solve(self, b):
        """Minimal-norm least-squares solution of A x = b (b vector or matrix)."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.shape[0]}")
        return self._apply_pinv(self._u, self._vt, b)

    def solve_transpose(self, b):
        """Minimal-norm least-squares solution of A^T x = b."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[1]:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.shape[1]}")
        # A = U S V^T  =>  pinv(A^T) = U pinv(S) V^T applied from the left
        return self._apply_pinv(self._vt.T, self._u.T, b)


def null_space_basis(a, rank_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the null space of ``a`` (n x k, k = n - rank)."""
    return SvdSolver(a, rank_tol).null_space


def min_norm_solve(a, b, rank_tol=DEFAULT_RANK_TOL):
    """Minimal-norm least-squares solution of ``a x = b`` for a vector b.

    Never fails on rank deficiency: among all residual minimizers the one
    with the smallest 2-norm is returned (pseudoinverse solution).
    """
    b = _as_finite_vector(b, "right-hand side")
    return SvdSolver(a, rank_tol).solve(b)


def multi_min_norm_solve(a, b, rank_tol=DEFAULT_RANK_TOL):
    """Column-wise min_norm_solve sharing a single factorization of ``a``."""
    b = _as_finite_matrix(b, "right-hand side")
    return SvdSolver(a, rank_tol).solve(b)


def cholesky_pivot_check(m):
    """Index of the first non-positive Cholesky pivot of ``m``, or None.

    Plain textbook factorization; only used to diagnose indefinite mass
    matrices, so the O(n^3) Python loop is acceptable.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    n = m.shape[0]
    low = np.zeros((n, n))
    for j in range(n):
        d = m[j, j] - low[j, :j] @ low[j, :j]
        if not d > 0.0:
            return j
        low[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            low[i, j] = (m[i, j] - low[i, :j] @ low[j, :j]) / low[j, j]
    return None


def max_generalized_frequency(k, m):
    """Largest natural frequency sqrt(max eig) of the (K, M) matrix pencil.

    Both matrices are symmetrized as (A + A^T)/2 before the eigensolve; the
    instantaneous tangent stiffness is not guaranteed symmetric. Negative
    eigenvalues (non-oscillatory modes) clamp to frequency 0.
    """
    k = _as_finite_matrix(k, "stiffness matrix")
    m = _as_finite_matrix(m, "mass matrix")
    if k.shape != m.shape or k.shape[0] != k.shape[1]:
        raise ValueError(f"incompatible pencil shapes {k.shape} and {m.shape}")
    if k.shape[0] == 0:
        return 0.0
    k = 0.5 * (k + k.T)
    m = 0.5 * (m + m.T)
    pivot = cholesky_pivot_check(m)
    if pivot is not None:
        raise SingularMassError(
            f"mass matrix is not positive definite (pivot {pivot})", pivot=pivot
        )
    eigvals = scipy.linalg.eigh(k, m, eigvals_only=True)
    return float(np.sqrt(max(eigvals[-1], 0.0)))
