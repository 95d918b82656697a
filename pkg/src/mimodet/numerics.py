"""Small dense complex linear algebra: products, Hermitian transpose, LU solve,
normal-equation pseudoinverse and Cholesky factorization.

Matrices are numpy complex128 arrays (row-major). Everything in scope is tiny
(at most ~12x12), so the factorizations favour explicit pivot/positivity
checks over speed.
"""

from __future__ import annotations

import numpy as np

# Relative pivot threshold below which a matrix is declared singular.
SINGULARITY_RTOL = 1e-12


class SingularMatrixError(ArithmeticError):
    """LU elimination hit a pivot below the relative singularity threshold."""


class RankDeficientError(SingularMatrixError):
    """Matrix does not have full column rank (detected via its Gram matrix)."""


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky factorization hit a non-positive diagonal pivot."""


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if not np.isfinite(a.real).all() or not np.isfinite(a.imag).all():
        raise ValueError("matrix entries must be finite")
    return a


def _as_vector(b) -> np.ndarray:
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={b.ndim}")
    if not np.isfinite(b.real).all() or not np.isfinite(b.imag).all():
        raise ValueError("vector entries must be finite")
    return b


def hermitian(a) -> np.ndarray:
    """Conjugate transpose."""
    return _as_matrix(a).conj().T.copy()


def mat_mul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def lu_factor(a) -> tuple[np.ndarray, np.ndarray]:
    """LU factorization with partial pivoting; returns (LU, perm).

    LU stores L (unit diagonal, below) and U (on and above); perm maps
    factored row i to original row perm[i]. Raises SingularMatrixError when a
    pivot magnitude drops below SINGULARITY_RTOL times the largest magnitude
    found in the input matrix.
    """
    a = _as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ValueError(f"square matrix required, got {n}x{m}")
    lu = a.copy()
    perm = np.arange(n)
    tol = SINGULARITY_RTOL * float(np.abs(a).max()) if n else 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if np.abs(lu[p, k]) <= tol:
            raise SingularMatrixError(
                f"singular matrix: pivot {np.abs(lu[p, k]):.3e} below threshold {tol:.3e}"
            )
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve using factors from lu_factor; b may be a vector or a matrix of columns."""
    x = np.asarray(b, dtype=np.complex128)[perm].copy()
    n = lu.shape[0]
    for k in range(n):  # forward: L y = P b
        x[k + 1:] -= np.multiply.outer(lu[k + 1:, k], x[k])
    for k in range(n - 1, -1, -1):  # backward: U x = y
        x[k] /= lu[k, k]
        if k:
            x[:k] -= np.multiply.outer(lu[:k, k], x[k])
    return x


def solve(a, b) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting.

    b may also be 2-D (one solve per column). Raises SingularMatrixError per
    the pivot threshold in lu_factor.
    """
    a = _as_matrix(a)
    b_arr = np.asarray(b, dtype=np.complex128)
    b_arr = _as_vector(b) if b_arr.ndim == 1 else _as_matrix(b)
    if a.shape[0] != b_arr.shape[0]:
        raise ValueError(f"dimension mismatch: A is {a.shape[0]}x{a.shape[1]}, b has {b_arr.shape[0]} rows")
    lu, perm = lu_factor(a)
    return lu_solve(lu, perm, b_arr)


def pseudo_inverse(h) -> np.ndarray:
    """Left pseudoinverse (H^H H)^-1 H^H for a full-column-rank H with rows >= cols."""
    h = _as_matrix(h)
    nr, nt = h.shape
    if nr < nt:
        raise ValueError(f"need rows >= cols, got {nr}x{nt}")
    hh = h.conj().T
    try:
        return solve(hh @ h, hh)
    except SingularMatrixError as exc:
        raise RankDeficientError(f"rank-deficient matrix ({nr}x{nt}): {exc}") from exc


def cholesky(r) -> np.ndarray:
    """Lower-triangular L with L L^H = R for Hermitian positive definite R.

    Raises NotPositiveDefiniteError when a diagonal pivot is <= 0. Only the
    lower triangle of R is read.
    """
    r = _as_matrix(r)
    n, m = r.shape
    if n != m:
        raise ValueError(f"square matrix required, got {n}x{m}")
    L = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        d = r[j, j].real - np.sum((L[j, :j] * L[j, :j].conj()).real)
        if d <= 0.0:
            raise NotPositiveDefiniteError(f"non-positive pivot {d:.3e} at column {j}")
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (r[j + 1:, j] - L[j + 1:, :j] @ L[j, :j].conj()) / L[j, j].real
    return L
