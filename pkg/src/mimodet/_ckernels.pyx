# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled detector kernels: linear filter solve, exhaustive ML enumeration,
Schnorr-Euchner sphere search and V-BLAST successive interference
cancellation. Same contracts and exception types as mimodet._pykernels."""

import numpy as np

from libc.math cimport INFINITY, sqrt

from .numerics import RankDeficientError, SingularMatrixError

# Matches numerics.SINGULARITY_RTOL; comparisons use squared magnitudes.
cdef double _SING_RTOL2 = 1e-24


cdef inline double _mag2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double complex _conj(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


cdef int _lu_solve(double complex* a, long long* piv, double complex* b,
                   int n, int m) noexcept nogil:
    """LU with partial pivoting on a (n x n, row-major), then solve the m RHS
    columns stored in b (n x m, row-major, overwritten with the solution).
    Returns 0 on success, 1 when a pivot falls below the relative threshold."""
    cdef int i, j, k, p, c
    cdef double best, mag, tol2
    cdef double complex f, tmp

    tol2 = 0.0
    for i in range(n * n):
        mag = _mag2(a[i])
        if mag > tol2:
            tol2 = mag
    tol2 *= _SING_RTOL2

    for k in range(n):
        p = k
        best = _mag2(a[k * n + k])
        for i in range(k + 1, n):
            mag = _mag2(a[i * n + k])
            if mag > best:
                best = mag
                p = i
        if best <= tol2:
            return 1
        if p != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = tmp
        piv[k] = p
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            a[i * n + k] = f
            for j in range(k + 1, n):
                a[i * n + j] = a[i * n + j] - f * a[k * n + j]

    for k in range(n):  # apply row swaps to b
        p = <int> piv[k]
        if p != k:
            for c in range(m):
                tmp = b[k * m + c]
                b[k * m + c] = b[p * m + c]
                b[p * m + c] = tmp
    for k in range(n):  # forward substitution (unit lower)
        for i in range(k + 1, n):
            f = a[i * n + k]
            for c in range(m):
                b[i * m + c] = b[i * m + c] - f * b[k * m + c]
    for k in range(n - 1, -1, -1):  # back substitution
        for c in range(m):
            b[k * m + c] = b[k * m + c] / a[k * n + k]
        for i in range(k):
            f = a[i * n + k]
            for c in range(m):
                b[i * m + c] = b[i * m + c] - f * b[k * m + c]
    return 0


def linear_soft(const double complex[::1] y, const double complex[:, ::1] H, double sigma2):
    """Soft linear estimate (H^H H + sigma2 I)^-1 H^H y (sigma2 = 0 -> zero forcing)."""
    cdef int nr = H.shape[0]
    cdef int nt = H.shape[1]
    gram_arr = np.empty((nt, nt), dtype=np.complex128)
    piv_arr = np.empty(nt, dtype=np.int64)
    out = np.empty(nt, dtype=np.complex128)
    cdef double complex[:, ::1] gram = gram_arr
    cdef long long[::1] piv = piv_arr
    cdef double complex[::1] x = out
    cdef int i, j, r, status
    cdef double complex acc

    with nogil:
        for i in range(nt):
            for j in range(nt):
                acc = 0
                for r in range(nr):
                    acc = acc + _conj(H[r, i]) * H[r, j]
                gram[i, j] = acc
            gram[i, i] = gram[i, i] + sigma2
            acc = 0
            for r in range(nr):
                acc = acc + _conj(H[r, i]) * y[r]
            x[i] = acc
        status = _lu_solve(&gram[0, 0], &piv[0], &x[0], nt, 1)
    if status:
        raise SingularMatrixError(
            f"singular filter matrix ({nt}x{nt}) at sigma2={sigma2!r}"
        )
    return out


cdef int _ml_worker(const double complex* y, const double complex* H,
                    const double complex* pts, int nr, int nt, int m,
                    double complex* partial, long long* digits,
                    long long* best) noexcept nogil:
    """Odometer enumeration with per-level partial residuals."""
    cdef long long count = 1
    cdef int i, k, r
    cdef double best_metric = INFINITY
    cdef double metric
    cdef double complex p

    for i in range(nt):
        count *= m
        digits[i] = 0
    # partial rows: row k+1 = y - sum_{j<=k} H[:,j] * points[digits[j]]
    for r in range(nr):
        partial[r] = y[r]
    for k in range(nt):
        p = pts[0]
        for r in range(nr):
            partial[(k + 1) * nr + r] = partial[k * nr + r] - H[r * nt + k] * p

    cdef long long c
    for c in range(count):
        metric = 0.0
        for r in range(nr):
            metric += _mag2(partial[nt * nr + r])
        if metric < best_metric:
            best_metric = metric
            for i in range(nt):
                best[i] = digits[i]
        # odometer increment: last digit fastest
        k = nt - 1
        while k >= 0 and digits[k] == m - 1:
            digits[k] = 0
            k -= 1
        if k < 0:
            break
        digits[k] += 1
        while k < nt:
            p = pts[digits[k]]
            for r in range(nr):
                partial[(k + 1) * nr + r] = partial[k * nr + r] - H[r * nt + k] * p
            k += 1
    return 0


def ml_search(const double complex[::1] y, const double complex[:, ::1] H,
              const double complex[::1] points):
    """Exhaustive argmin of ||y - Hx||^2, odometer order, strict-less-than
    replacement (first minimum wins)."""
    cdef int nr = H.shape[0]
    cdef int nt = H.shape[1]
    cdef int m = points.shape[0]
    partial_arr = np.empty((nt + 1) * nr, dtype=np.complex128)
    digits_arr = np.empty(nt, dtype=np.int64)
    best_arr = np.empty(nt, dtype=np.int64)
    cdef double complex[::1] partial = partial_arr
    cdef long long[::1] digits = digits_arr
    cdef long long[::1] best = best_arr
    with nogil:
        _ml_worker(&y[0], &H[0, 0], &points[0], nr, nt, m,
                   &partial[0], &digits[0], &best[0])
    return best_arr


cdef int _chol_real(double* a, int n) noexcept nogil:
    """In-place lower Cholesky of a real SPD matrix; 1 when a pivot is <= 0."""
    cdef int i, j, k
    cdef double d
    for j in range(n):
        d = a[j * n + j]
        for k in range(j):
            d -= a[j * n + k] * a[j * n + k]
        if d <= 0.0:
            return 1
        a[j * n + j] = sqrt(d)
        for i in range(j + 1, n):
            d = a[i * n + j]
            for k in range(j):
                d -= a[i * n + k] * a[j * n + k]
            a[i * n + j] = d / a[j * n + j]
    return 0


cdef long long _sphere_worker(const double* yr, const double* hr,
                              const double* pam, int side, int nrr, int kd,
                              int nt, double* L, double* work, long long* iwork,
                              long long* best_cidx) noexcept nogil:
    """DFS Schnorr-Euchner search over the real-valued lattice.

    Returns leaf-visit count (complete candidates evaluated), or -1 when the
    Gram matrix is not positive definite. Exact metric ties resolve to the
    lexicographically smallest complex index sequence.
    """
    # work layout: b | xi | acc | xval | costs (kd*side); iwork: rank | xidx | order (kd*side)
    cdef double* b = work
    cdef double* xi = work + kd
    cdef double* acc = work + 2 * kd
    cdef double* xval = work + 3 * kd
    cdef double* costs = work + 4 * kd
    cdef long long* rank = iwork
    cdef long long* xidx = iwork + kd
    cdef long long* order = iwork + 2 * kd

    cdef int i, j, k, r, v
    cdef double acc_d, d
    cdef long long leaves = 0
    cdef long long ca, cb
    cdef bint lex_smaller

    # Gram matrix A = Hr^T Hr into L, then factor in place.
    for i in range(kd):
        for j in range(kd):
            acc_d = 0.0
            for r in range(nrr):
                acc_d += hr[r * kd + i] * hr[r * kd + j]
            L[i * kd + j] = acc_d
    if _chol_real(L, kd):
        return -1

    # Unconstrained LS center xi: L w = Hr^T yr, then L^T xi = w (w kept in xi).
    for i in range(kd):
        acc_d = 0.0
        for r in range(nrr):
            acc_d += hr[r * kd + i] * yr[r]
        b[i] = acc_d
    for i in range(kd):
        acc_d = b[i]
        for j in range(i):
            acc_d -= L[i * kd + j] * xi[j]
        xi[i] = acc_d / L[i * kd + i]
    for i in range(kd - 1, -1, -1):
        acc_d = xi[i]
        for j in range(i + 1, kd):
            acc_d -= L[j * kd + i] * xi[j]
        xi[i] = acc_d / L[i * kd + i]
    # b[k] = sum_{j >= k} R[k, j] xi[j] with R = L^T
    for k in range(kd):
        acc_d = 0.0
        for j in range(k, kd):
            acc_d += L[j * kd + k] * xi[j]
        b[k] = acc_d

    cdef double best = INFINITY
    cdef bint have_best = 0
    k = kd - 1
    acc[k] = 0.0
    _sphere_enter(k, b, L, pam, side, kd, xval, costs, order, rank)
    while True:
        if rank[k] == side:
            k += 1
            if k == kd:
                break
            rank[k] += 1
            continue
        v = <int> order[k * side + rank[k]]
        d = acc[k] + costs[k * side + v]
        if k == 0:
            leaves += 1
        if d > best:
            k += 1
            if k == kd:
                break
            rank[k] += 1
            continue
        xidx[k] = v
        xval[k] = pam[v]
        if k == 0:
            if d < best:
                best = d
                have_best = 1
                for i in range(nt):
                    best_cidx[i] = xidx[i] * side + xidx[nt + i]
            elif have_best and d == best:
                lex_smaller = 0
                for i in range(nt):
                    ca = xidx[i] * side + xidx[nt + i]
                    cb = best_cidx[i]
                    if ca != cb:
                        lex_smaller = ca < cb
                        break
                if lex_smaller:
                    for i in range(nt):
                        best_cidx[i] = xidx[i] * side + xidx[nt + i]
            rank[k] += 1
        else:
            acc[k - 1] = d
            k -= 1
            _sphere_enter(k, b, L, pam, side, kd, xval, costs, order, rank)
    return leaves


cdef void _sphere_enter(int k, const double* b, const double* L,
                        const double* pam, int side, int kd, const double* xval,
                        double* costs, long long* order, long long* rank) noexcept nogil:
    """Compute branch costs at level k and sort candidate levels ascending
    (stable: equal costs keep increasing level order)."""
    cdef int j, v, pos
    cdef double t, e, c
    cdef long long tmp
    t = b[k]
    for j in range(k + 1, kd):
        t -= L[j * kd + k] * xval[j]
    for v in range(side):
        e = L[k * kd + k] * pam[v] - t
        costs[k * side + v] = e * e
        order[k * side + v] = v
    for v in range(1, side):  # stable insertion sort by cost
        tmp = order[k * side + v]
        c = costs[k * side + tmp]
        pos = v
        while pos > 0 and costs[k * side + order[k * side + pos - 1]] > c:
            order[k * side + pos] = order[k * side + pos - 1]
            pos -= 1
        order[k * side + pos] = tmp
    rank[k] = 0


def sphere_search(const double complex[::1] y, const double complex[:, ::1] H,
                  const double[::1] pam, int side):
    """Exact ML via depth-first Schnorr-Euchner search; returns (indices, leaf
    visits). Same tie-break as ml_search."""
    cdef int nr = H.shape[0]
    cdef int nt = H.shape[1]
    cdef int kd = 2 * nt
    cdef int nrr = 2 * nr

    hr_arr = np.empty((nrr, kd), dtype=np.float64)
    yr_arr = np.empty(nrr, dtype=np.float64)
    l_arr = np.empty(kd * kd, dtype=np.float64)
    work_arr = np.empty(4 * kd + kd * side, dtype=np.float64)
    iwork_arr = np.zeros(2 * kd + kd * side, dtype=np.int64)
    best_arr = np.zeros(nt, dtype=np.int64)

    cdef double[:, ::1] hr = hr_arr
    cdef double[::1] yr = yr_arr
    cdef double[::1] lbuf = l_arr
    cdef double[::1] work = work_arr
    cdef long long[::1] iwork = iwork_arr
    cdef long long[::1] best = best_arr
    cdef int i, j
    cdef long long leaves

    with nogil:
        for i in range(nr):
            yr[i] = y[i].real
            yr[nr + i] = y[i].imag
            for j in range(nt):
                hr[i, j] = H[i, j].real
                hr[i, nt + j] = -H[i, j].imag
                hr[nr + i, j] = H[i, j].imag
                hr[nr + i, nt + j] = H[i, j].real
        leaves = _sphere_worker(&yr[0], &hr[0, 0], &pam[0], side, nrr, kd, nt,
                                &lbuf[0], &work[0], &iwork[0], &best[0])
    if leaves < 0:
        raise RankDeficientError(f"channel matrix ({nr}x{nt}) lacks full column rank")
    return best_arr, int(leaves)


cdef int _vblast_worker(const double complex* y, const double complex* H,
                        const double complex* pts, int nr, int nt, int m,
                        double sigma2, bint use_mmse,
                        double complex* cwork, double* dwork, long long* iwork,
                        long long* est, long long* order_out,
                        double complex* soft) noexcept nogil:
    """Ordered SIC; returns 0 ok, 1 singular nulling matrix at some stage."""
    # cwork: gram (nt*nt) | P (nt*nt) | W (nt*nr) | resid (nr)
    cdef double complex* gram = cwork
    cdef double complex* P = cwork + nt * nt
    cdef double complex* W = cwork + 2 * nt * nt
    cdef double complex* resid = cwork + 2 * nt * nt + nt * nr
    cdef double* scores = dwork
    cdef long long* active = iwork
    cdef long long* piv = iwork + nt

    cdef int na = nt
    cdef int stage, a, c2, r, jbest, i, kant
    cdef double smin, s
    cdef double complex accz, z, dz
    cdef double dbest, dcur

    for i in range(nt):
        active[i] = i
    for r in range(nr):
        resid[r] = y[r]

    for stage in range(nt):
        for a in range(na):
            for c2 in range(na):
                accz = 0
                for r in range(nr):
                    accz = accz + _conj(H[r * nt + active[a]]) * H[r * nt + active[c2]]
                gram[a * na + c2] = accz
            gram[a * na + a] = gram[a * na + a] + sigma2
        # P = gram^-1 via LU against the identity
        for a in range(na):
            for c2 in range(na):
                P[a * na + c2] = 1 if a == c2 else 0
        if _lu_solve(gram, piv, P, na, na):
            return 1
        if use_mmse:
            jbest = 0
            smin = P[0].real
            for a in range(1, na):
                s = P[a * na + a].real
                if s < smin:
                    smin = s
                    jbest = a
            for r in range(nr):  # nulling row for the chosen layer only
                accz = 0
                for c2 in range(na):
                    accz = accz + P[jbest * na + c2] * _conj(H[r * nt + active[c2]])
                W[r] = accz
        else:
            jbest = 0
            smin = INFINITY
            for a in range(na):
                s = 0.0
                for r in range(nr):
                    accz = 0
                    for c2 in range(na):
                        accz = accz + P[a * na + c2] * _conj(H[r * nt + active[c2]])
                    W[a * nr + r] = accz
                    s += _mag2(accz)
                if s < smin:
                    smin = s
                    jbest = a
            if jbest != 0:
                for r in range(nr):
                    W[r] = W[jbest * nr + r]
        kant = <int> active[jbest]
        z = 0
        for r in range(nr):
            z = z + W[r] * resid[r]
        # hard slice: nearest point, first minimum wins
        jbest = 0
        dbest = INFINITY
        for i in range(m):
            dz = pts[i] - z
            dcur = _mag2(dz)
            if dcur < dbest:
                dbest = dcur
                jbest = i
        est[kant] = jbest
        order_out[stage] = kant
        soft[stage] = z
        for r in range(nr):
            resid[r] = resid[r] - H[r * nt + kant] * pts[jbest]
        # drop the detected layer
        i = 0
        while active[i] != kant:
            i += 1
        while i < na - 1:
            active[i] = active[i + 1]
            i += 1
        na -= 1
    return 0


def vblast(const double complex[::1] y, const double complex[:, ::1] H,
           double sigma2, const double complex[::1] points, bint use_mmse):
    """Ordered SIC; returns (estimate, detection order, per-layer soft values).
    Ordering ties resolve toward the smallest original antenna index."""
    cdef int nr = H.shape[0]
    cdef int nt = H.shape[1]
    cdef int m = points.shape[0]
    cwork_arr = np.empty(2 * nt * nt + nt * nr + nr, dtype=np.complex128)
    dwork_arr = np.empty(nt, dtype=np.float64)
    iwork_arr = np.empty(2 * nt, dtype=np.int64)
    est_arr = np.zeros(nt, dtype=np.int64)
    order_arr = np.zeros(nt, dtype=np.int64)
    soft_arr = np.zeros(nt, dtype=np.complex128)

    cdef double complex[::1] cwork = cwork_arr
    cdef double[::1] dwork = dwork_arr
    cdef long long[::1] iwork = iwork_arr
    cdef long long[::1] est = est_arr
    cdef long long[::1] order_out = order_arr
    cdef double complex[::1] soft = soft_arr
    cdef int status

    with nogil:
        status = _vblast_worker(&y[0], &H[0, 0], &points[0], nr, nt, m,
                                sigma2, use_mmse, &cwork[0], &dwork[0],
                                &iwork[0], &est[0], &order_out[0], &soft[0])
    if status:
        if use_mmse:
            raise SingularMatrixError("singular nulling matrix in mmse cancellation")
        raise RankDeficientError("rank-deficient channel during zf cancellation")
    return est_arr, order_arr, soft_arr
