"""Pure-numpy implementations of the hot detector kernels.

Fallback backend used when the compiled extension is unavailable (or forced
via MIMODET_BACKEND=python). Same contracts as mimodet._ckernels: identical
estimates, identical tie-breaks, same exception types.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .numerics import RankDeficientError, SingularMatrixError, cholesky, solve

_ML_CHUNK = 32768


def linear_soft(y: np.ndarray, H: np.ndarray, sigma2: float) -> np.ndarray:
    """Soft linear estimate (H^H H + sigma2 I)^-1 H^H y (sigma2 = 0 -> zero forcing)."""
    hh = H.conj().T
    gram = hh @ H
    if sigma2:
        gram = gram + sigma2 * np.eye(H.shape[1])
    return solve(gram, hh @ y)


@lru_cache(maxsize=32)
def _candidate_grid(m: int, nt: int) -> np.ndarray:
    # All index vectors in odometer order (last antenna spins fastest).
    grid = np.indices((m,) * nt, dtype=np.int16).reshape(nt, -1).T.copy()
    grid.setflags(write=False)
    return grid


def ml_search(y: np.ndarray, H: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Exhaustive argmin of ||y - Hx||^2 over all index vectors, odometer order,
    strict-less-than replacement (first minimum wins)."""
    nt = H.shape[1]
    grid = _candidate_grid(len(points), nt)
    ht = H.T.copy()
    best_metric = np.inf
    best_row = 0
    for start in range(0, grid.shape[0], _ML_CHUNK):
        rows = grid[start:start + _ML_CHUNK]
        err = y[None, :] - points[rows] @ ht
        metrics = np.sum(err.real * err.real + err.imag * err.imag, axis=1)
        i = int(np.argmin(metrics))
        if metrics[i] < best_metric:
            best_metric = float(metrics[i])
            best_row = start + i
    return grid[best_row].astype(np.int64)


def sphere_search(y: np.ndarray, H: np.ndarray, pam: np.ndarray, side: int):
    """Exact ML via depth-first Schnorr-Euchner search on the real-valued lattice.

    Returns (index vector, leaf visits). Infinite initial radius, shrunk at
    each leaf; exact metric ties resolved toward the lexicographically
    smallest index sequence, matching ml_search. Leaf visits count complete
    candidates whose metric was evaluated (<= M^nt by construction).
    """
    nr, nt = H.shape
    k_dims = 2 * nt
    hr = np.block([[H.real, -H.imag], [H.imag, H.real]])
    yr = np.concatenate([y.real, y.imag])

    gram = hr.T @ hr
    try:
        L = cholesky(gram).real  # gram is real SPD for full-column-rank H
    except ArithmeticError as exc:
        raise RankDeficientError(f"channel matrix ({nr}x{nt}) lacks full column rank") from exc
    rhs = hr.T @ yr
    xi = np.empty(k_dims)
    w = np.empty(k_dims)
    for i in range(k_dims):  # forward: L w = rhs
        w[i] = (rhs[i] - L[i, :i] @ w[:i]) / L[i, i]
    for i in range(k_dims - 1, -1, -1):  # backward: L^T xi = w
        xi[i] = (w[i] - L[i + 1:, i] @ xi[i + 1:]) / L[i, i]
    b = np.array([L[k:, k] @ xi[k:] for k in range(k_dims)])

    order = np.empty((k_dims, side), dtype=np.int64)
    costs = np.empty((k_dims, side))
    rank = np.zeros(k_dims, dtype=np.int64)
    acc = np.zeros(k_dims)
    xval = np.zeros(k_dims)
    xidx = np.zeros(k_dims, dtype=np.int64)

    def enter(k: int):
        t = b[k] - L[k + 1:, k] @ xval[k + 1:]
        e = L[k, k] * pam - t
        costs[k] = e * e
        order[k] = np.argsort(costs[k], kind="stable")
        rank[k] = 0

    best = np.inf
    best_cidx = None
    leaves = 0
    k = k_dims - 1
    enter(k)
    while True:
        if rank[k] == side:
            k += 1
            if k == k_dims:
                break
            rank[k] += 1
            continue
        level = order[k, rank[k]]
        d = acc[k] + costs[k, level]
        if k == 0:
            leaves += 1
        if d > best:
            # SE order is nondecreasing within the level: prune the rest.
            k += 1
            if k == k_dims:
                break
            rank[k] += 1
            continue
        xidx[k] = level
        xval[k] = pam[level]
        if k == 0:
            cidx = tuple(xidx[:nt] * side + xidx[nt:])
            if d < best or (d == best and cidx < best_cidx):
                best = d
                best_cidx = cidx
            rank[k] += 1
        else:
            acc[k - 1] = d
            k -= 1
            enter(k)
    return np.array(best_cidx, dtype=np.int64), leaves


def _slice(z: complex, points: np.ndarray) -> int:
    d = points - z
    return int(np.argmin(d.real * d.real + d.imag * d.imag))


def vblast(y: np.ndarray, H: np.ndarray, sigma2: float, points: np.ndarray, use_mmse: bool):
    """Ordered successive interference cancellation.

    Ordering: minimum pseudoinverse-row-norm (zf) or minimum error-covariance
    diagonal (mmse); ties toward the smallest original antenna index. Returns
    (estimate, detection order, per-layer soft values in detection order).
    """
    nr, nt = H.shape
    active = list(range(nt))
    est = np.zeros(nt, dtype=np.int64)
    order_out = np.zeros(nt, dtype=np.int64)
    soft = np.zeros(nt, dtype=np.complex128)
    r = y.astype(np.complex128, copy=True)
    for stage in range(nt):
        ha = H[:, active]
        hah = ha.conj().T
        gram = hah @ ha
        if sigma2:
            gram = gram + sigma2 * np.eye(len(active))
        try:
            p = solve(gram, np.eye(len(active), dtype=np.complex128))
        except SingularMatrixError as exc:
            if use_mmse:
                raise
            raise RankDeficientError(f"rank-deficient channel at cancellation stage {stage}") from exc
        if use_mmse:
            scores = np.diagonal(p).real
            j = int(np.argmin(scores))
            w_row = p[j] @ hah
        else:
            w = p @ hah
            scores = np.sum(w.real * w.real + w.imag * w.imag, axis=1)
            j = int(np.argmin(scores))
            w_row = w[j]
        k = active[j]
        z = complex(w_row @ r)
        e = _slice(z, points)
        est[k] = e
        order_out[stage] = k
        soft[stage] = z
        r = r - H[:, k] * points[e]
        active.pop(j)
    return est, order_out, soft
