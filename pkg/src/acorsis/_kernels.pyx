# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: pairwise product correlations and coordinate descent.

Every routine here has a numpy twin in ``_fallback.py`` with the same
signature; ``_backend.py`` picks one at import time.
"""

import numpy as np

from cython.parallel cimport prange, threadid
from libc.math cimport sqrt, fabs, copysign

cdef double VARIANCE_RTOL = 1e-12
# entering/leaving the support by less than this does not block convergence
cdef double SUPPORT_EPS = 1e-10


cdef extern from "csrc/rowsums.h" nogil:
    void acorsis_row_sums(const double* Xc, Py_ssize_t n, Py_ssize_t p,
                          const double* y, Py_ssize_t j, Py_ssize_t k0, Py_ssize_t k1,
                          double* az, double* azz, double* azy)


cdef inline void _row_sums(const double[:, ::1] Xc, const double[::1] y,
                           Py_ssize_t j, Py_ssize_t k0, Py_ssize_t k1,
                           double* az, double* azz, double* azy) noexcept nogil:
    acorsis_row_sums(&Xc[0, 0], Xc.shape[0], Xc.shape[1], &y[0], j, k0, k1, az, azz, azy)


cdef inline double _corr(double sz, double szz, double szy, double n,
                         double ysum, double ydenom, int* zero) noexcept nogil:
    cdef double mean = sz / n
    cdef double ss = szz - sz * mean
    cdef double r
    if ss <= VARIANCE_RTOL * szz or ss <= 0.0:
        zero[0] = 1
        return 0.0
    zero[0] = 0
    r = (szy - mean * ysum) / sqrt(ss * ydenom)
    if r > 1.0:
        return 1.0
    if r < -1.0:
        return -1.0
    return r


def main_correlations(const double[:, ::1] Xc, const double[::1] y,
                      double ysum, double ydenom):
    """Signed correlation of every column with ``y``; returns (corr, zero_count).

    ``Xc`` is the row-major copy of the design.
    """
    cdef Py_ssize_t n = Xc.shape[0], p = Xc.shape[1], i, k
    cdef int zero, nz = 0
    out = np.empty(p)
    sums = np.zeros((3, p))
    cdef double[::1] o = out
    cdef double[:, ::1] s = sums
    cdef double x
    with nogil:
        for i in range(n):
            for k in range(p):
                x = Xc[i, k]
                s[0, k] += x
                s[1, k] += x * x
                s[2, k] += x * y[i]
        for k in range(p):
            o[k] = _corr(s[0, k], s[1, k], s[2, k], <double>n, ysum, ydenom, &zero)
            nz += zero
    return out, nz


def pair_row(const double[:, ::1] Xc, const double[::1] y, double ysum,
             double ydenom, Py_ssize_t j, double[::1] out):
    """Signed correlation of ``x_j * x_k`` with ``y`` for every ``k > j`` (0-based).

    Writes ``p - j - 1`` values into ``out`` and returns the zero-variance count.
    """
    cdef Py_ssize_t n = Xc.shape[0], p = Xc.shape[1], k
    cdef int zero, nz = 0
    sums = np.empty((3, p))
    cdef double[:, ::1] s = sums
    with nogil:
        _row_sums(Xc, y, j, j + 1, p, &s[0, 0], &s[1, 0], &s[2, 0])
        for k in range(j + 1, p):
            out[k - j - 1] = _corr(s[0, k], s[1, k], s[2, k], <double>n, ysum, ydenom, &zero)
            nz += zero
    return nz


def acor_scan(const double[:, ::1] Xc, const double[::1] y, double ysum,
              double ydenom, int threads=1):
    """Aggregated correlation of every variable.

    ``Xc`` is the row-major copy of the standardized design.  Returns
    ``(scores, partner, zero_count)`` where ``partner`` holds the 1-based
    label of the maximizing partner (0 for the main effect), ties resolved
    toward the smallest label.  With one thread each pair is evaluated once
    and credited to both endpoints; with more, rows are scanned independently
    in parallel.  Pair sums are formed identically on both paths, so the
    output does not depend on ``threads``.
    """
    cdef Py_ssize_t n = Xc.shape[0], p = Xc.shape[1], j, k
    cdef double v
    cdef int zero, nz
    main, nz = main_correlations(Xc, y, ysum, ydenom)
    scores = np.abs(main)
    partner = np.zeros(p, dtype=np.int64)
    cdef double[::1] best = scores
    cdef long long[::1] part = partner
    cdef double[:, ::1] s

    if threads <= 1:
        sums = np.empty((3, p))
        s = sums
        with nogil:
            for j in range(p - 1):
                _row_sums(Xc, y, j, j + 1, p, &s[0, 0], &s[1, 0], &s[2, 0])
                for k in range(j + 1, p):
                    v = fabs(_corr(s[0, k], s[1, k], s[2, k], <double>n, ysum, ydenom, &zero))
                    nz += zero
                    if v > best[j]:
                        best[j] = v
                        part[j] = k + 1
                    if v > best[k]:
                        best[k] = v
                        part[k] = j + 1
    else:
        sums = np.empty((threads, 3, p))
        nz += _acor_rows_parallel(Xc, y, ysum, ydenom, best, part, sums, threads)
    return scores, partner, nz


cdef int _acor_rows_parallel(const double[:, ::1] Xc, const double[::1] y,
                             double ysum, double ydenom, double[::1] best,
                             long long[::1] part, double[:, :, ::1] sums,
                             int threads):
    cdef Py_ssize_t n = Xc.shape[0], p = Xc.shape[1], j, k
    cdef double v, b
    cdef long long bk
    cdef int zero, tid
    cdef int nz = 0
    for j in prange(p, nogil=True, schedule="dynamic", num_threads=threads):
        tid = threadid()
        _row_sums(Xc, y, j, 0, p, &sums[tid, 0, 0], &sums[tid, 1, 0], &sums[tid, 2, 0])
        b = best[j]
        bk = part[j]
        for k in range(p):
            if k == j:
                continue
            v = fabs(_corr(sums[tid, 0, k], sums[tid, 1, k], sums[tid, 2, k],
                           <double>n, ysum, ydenom, &zero))
            if k > j:
                nz += zero
            if v > b:
                b = v
                bk = k + 1
        best[j] = b
        part[j] = bk
    return nz


# ---------------------------------------------------------------------------
# one-dimensional GRESH coordinate problem


cdef double _solve_half(double a, double cp, double w, double s1, double s2,
                        double tol, int maxit, int* fallback) noexcept nogil:
    # root of a*u - cp + w*sum_i u/sqrt(u^2 + s_i^2) on [0, cp/a]; s_i <= 0 are absent
    cdef double lo = 0.0, hi = cp / a, u, g, gp, q, un
    cdef int it
    if w <= 0.0 or (s1 <= 0.0 and s2 <= 0.0):
        return hi
    u = hi
    for it in range(maxit):
        g = a * u - cp
        gp = a
        if s1 > 0.0:
            q = sqrt(u * u + s1 * s1)
            g += w * u / q
            gp += w * s1 * s1 / (q * q * q)
        if s2 > 0.0:
            q = sqrt(u * u + s2 * s2)
            g += w * u / q
            gp += w * s2 * s2 / (q * q * q)
        if g == 0.0:
            return u
        if g > 0.0:
            hi = u
        else:
            lo = u
        un = u - g / gp
        if not (un > lo and un < hi):
            un = 0.5 * (lo + hi)
            fallback[0] += 1
        if fabs(un - u) <= tol * (1.0 + fabs(u)) or hi - lo <= tol * (1.0 + hi):
            return un
        u = un
    fallback[0] += 1
    return 0.5 * (lo + hi)


cdef double _solve1d(double a, double c, double t, double w, double s1, double s2,
                     double tol, int maxit, int* fallback) noexcept nogil:
    if a <= 0.0 or fabs(c) <= t:
        return 0.0
    return copysign(_solve_half(a, fabs(c) - t, w, s1, s2, tol, maxit, fallback), c)


def solve1d(double a, double c, double t, double w, double s1=0.0, double s2=0.0,
            double tol=1e-10, int maxit=100):
    """Minimize ``a/2 u^2 - c u + t|u| + w*sum_i sqrt(u^2 + s_i^2)``.

    Terms with ``s_i <= 0`` are dropped.  Returns ``(u, fallback_count)``.
    """
    cdef int fb = 0
    u = _solve1d(a, c, t, w, s1, s2, tol, maxit, &fb)
    return u, fb


# ---------------------------------------------------------------------------
# GRESH coordinate descent


cdef inline double _dot(const double[::1, :] Z, Py_ssize_t col,
                        double[::1] r, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += Z[i, col] * r[i]
    return s


cdef inline void _axpy(const double[::1, :] Z, Py_ssize_t col, double alpha,
                       double[::1] r, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        r[i] -= alpha * Z[i, col]


cdef double _gresh_penalty(double[::1] beta, Py_ssize_t d,
                           const long long[:, ::1] members,
                           double nl1, double nl2) noexcept nogil:
    cdef double pen = 0.0, g, b
    cdef Py_ssize_t a, q, c, m = beta.shape[0]
    for a in range(d):
        g = beta[a] * beta[a]
        for q in range(d - 1):
            b = beta[members[a, q]]
            g += b * b
        pen += nl2 * sqrt(g)
    for c in range(d, m):
        pen += nl1 * fabs(beta[c])
    return pen


cdef inline double _half_ss(double[::1] r, Py_ssize_t n) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += r[i] * r[i]
    return 0.5 * s


def gresh_cd(const double[::1, :] Z, const double[::1] colsq, double[::1] beta,
             double[::1] b0, double[::1] r, Py_ssize_t d,
             const long long[::1] pair_a, const long long[::1] pair_b,
             const long long[:, ::1] members, double lam1, double lam2,
             double tol, int max_sweeps, double newton_tol, int newton_maxit,
             double[::1] trace=None):
    """Cyclic coordinate descent for the group-penalized interaction objective.

    Columns ``0..d-1`` of ``Z`` are main effects, the remaining columns are
    interactions ``(pair_a[c-d], pair_b[c-d])`` given as main slots.
    ``members[a]`` lists the interaction columns touching slot ``a``.
    ``beta``, ``b0`` and ``r`` (current residual) are updated in place.

    Returns ``(sweeps, converged, newton_fallbacks, trace_len)``.
    """
    cdef Py_ssize_t n = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t c, a, bslot, q, i, col, ntrace = 0, cap = 0
    cdef double nl1 = n * lam1, nl2 = n * lam2
    cdef double old, new, cc, sa, sb, t, s, mean, maxchg, v
    cdef int fb = 0, sweeps = 0, converged = 0, full = 1, changed_support
    cdef bint record = trace is not None
    if record:
        cap = trace.shape[0]

    with nogil:
        while sweeps < max_sweeps:
            maxchg = 0.0
            changed_support = 0
            # intercept
            mean = 0.0
            for i in range(n):
                mean += r[i]
            mean /= n
            b0[0] += mean
            for i in range(n):
                r[i] -= mean
            if fabs(mean) > maxchg:
                maxchg = fabs(mean)
            if record and ntrace < cap:
                trace[ntrace] = _half_ss(r, n) + _gresh_penalty(beta, d, members, nl1, nl2)
                ntrace += 1
            for c in range(m):
                old = beta[c]
                if not full and old == 0.0:
                    continue
                if c < d:
                    s = 0.0
                    for q in range(d - 1):
                        v = beta[members[c, q]]
                        s += v * v
                    s = sqrt(s)
                    cc = _dot(Z, c, r, n) + colsq[c] * old
                    if s == 0.0:
                        new = _solve1d(colsq[c], cc, nl2, nl2, 0.0, 0.0,
                                       newton_tol, newton_maxit, &fb)
                    else:
                        new = _solve1d(colsq[c], cc, 0.0, nl2, s, 0.0,
                                       newton_tol, newton_maxit, &fb)
                else:
                    a = pair_a[c - d]
                    bslot = pair_b[c - d]
                    sa = beta[a] * beta[a]
                    sb = beta[bslot] * beta[bslot]
                    for q in range(d - 1):
                        col = members[a, q]
                        if col != c:
                            sa += beta[col] * beta[col]
                        col = members[bslot, q]
                        if col != c:
                            sb += beta[col] * beta[col]
                    sa = sqrt(sa)
                    sb = sqrt(sb)
                    t = nl1
                    if sa == 0.0:
                        t += nl2
                    if sb == 0.0:
                        t += nl2
                    cc = _dot(Z, c, r, n) + colsq[c] * old
                    new = _solve1d(colsq[c], cc, t, nl2, sa, sb,
                                   newton_tol, newton_maxit, &fb)
                if new != old:
                    _axpy(Z, c, new - old, r, n)
                    beta[c] = new
                    if fabs(new - old) > maxchg:
                        maxchg = fabs(new - old)
                    if (old == 0.0) != (new == 0.0) and fabs(new - old) > SUPPORT_EPS:
                        changed_support = 1
                if record and ntrace < cap:
                    trace[ntrace] = _half_ss(r, n) + _gresh_penalty(beta, d, members, nl1, nl2)
                    ntrace += 1
            sweeps += 1
            if maxchg < tol and not changed_support:
                if full:
                    converged = 1
                    break
                full = 1
            else:
                full = 0
    return sweeps, bool(converged), fb, ntrace


def gresh_objective_kernel(double[::1] r, double[::1] beta, Py_ssize_t d,
                           const long long[:, ::1] members, double lam1, double lam2):
    cdef Py_ssize_t n = r.shape[0]
    return _half_ss(r, n) + _gresh_penalty(beta, d, members, n * lam1, n * lam2)


# ---------------------------------------------------------------------------
# SHIM coordinate descent


cdef inline double _soft(double c, double t) noexcept nogil:
    if c > t:
        return c - t
    if c < -t:
        return c + t
    return 0.0


cdef double _shim_penalty(double[::1] beta, double[::1] gamma,
                          double nl1, double nl2) noexcept nogil:
    cdef double pen = 0.0
    cdef Py_ssize_t a
    for a in range(beta.shape[0]):
        pen += nl2 * fabs(beta[a])
    for a in range(gamma.shape[0]):
        pen += nl1 * fabs(gamma[a])
    return pen


def shim_cd(const double[::1, :] Z, const double[::1] colsq, double[::1] beta,
            double[::1] gamma, double[::1] b0, double[::1] r, Py_ssize_t d,
            const long long[::1] pair_a, const long long[::1] pair_b,
            const long long[:, ::1] members, double lam1, double lam2,
            double tol, int max_sweeps, double[::1] w, double[::1] trace=None):
    """Coordinate descent for the multiplicative-hierarchy (SHIM) objective.

    Interaction ``c`` has coefficient ``gamma[c-d] * beta[a] * beta[b]``.
    ``w`` is a length-``n`` scratch buffer.  Each sweep updates the
    intercept, then every ``beta``, then every ``gamma``.

    Returns ``(sweeps, converged, degenerate_count, trace_len)``.
    """
    cdef Py_ssize_t n = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t a, q, c, col, other, i, ntrace = 0, cap = 0
    cdef double nl1 = n * lam1, nl2 = n * lam2
    cdef double old, new, cc, aa, mean, maxchg, f, g, prod
    cdef int sweeps = 0, converged = 0, full = 1, changed_support, degenerate = 0
    cdef bint record = trace is not None
    if record:
        cap = trace.shape[0]

    with nogil:
        while sweeps < max_sweeps:
            maxchg = 0.0
            changed_support = 0
            mean = 0.0
            for i in range(n):
                mean += r[i]
            mean /= n
            b0[0] += mean
            for i in range(n):
                r[i] -= mean
            if fabs(mean) > maxchg:
                maxchg = fabs(mean)
            if record and ntrace < cap:
                trace[ntrace] = _half_ss(r, n) + _shim_penalty(beta, gamma, nl1, nl2)
                ntrace += 1

            for a in range(d):
                old = beta[a]
                if not full and old == 0.0:
                    continue
                for i in range(n):
                    w[i] = Z[i, a]
                for q in range(d - 1):
                    col = members[a, q]
                    g = gamma[col - d]
                    if g == 0.0:
                        continue
                    other = pair_b[col - d] if pair_a[col - d] == a else pair_a[col - d]
                    f = g * beta[other]
                    if f == 0.0:
                        continue
                    for i in range(n):
                        w[i] += f * Z[i, col]
                aa = 0.0
                cc = 0.0
                for i in range(n):
                    aa += w[i] * w[i]
                    cc += w[i] * r[i]
                if aa <= 0.0:
                    continue
                cc += aa * old
                new = _soft(cc, nl2) / aa
                if new != old:
                    for i in range(n):
                        r[i] -= (new - old) * w[i]
                    beta[a] = new
                    if fabs(new - old) > maxchg:
                        maxchg = fabs(new - old)
                    if (old == 0.0) != (new == 0.0) and fabs(new - old) > SUPPORT_EPS:
                        changed_support = 1
                if record and ntrace < cap:
                    trace[ntrace] = _half_ss(r, n) + _shim_penalty(beta, gamma, nl1, nl2)
                    ntrace += 1

            for c in range(d, m):
                old = gamma[c - d]
                if not full and old == 0.0:
                    continue
                prod = beta[pair_a[c - d]] * beta[pair_b[c - d]]
                if prod == 0.0:
                    if old != 0.0:
                        gamma[c - d] = 0.0
                        changed_support = 1
                    degenerate += 1
                    continue
                aa = prod * prod * colsq[c]
                if aa <= 0.0:
                    continue
                cc = prod * _dot(Z, c, r, n) + aa * old
                new = _soft(cc, nl1) / aa
                if new != old:
                    _axpy(Z, c, prod * (new - old), r, n)
                    gamma[c - d] = new
                    if fabs(prod * (new - old)) > maxchg:
                        maxchg = fabs(prod * (new - old))
                    if (old == 0.0) != (new == 0.0) and fabs(new - old) > SUPPORT_EPS:
                        changed_support = 1
                if record and ntrace < cap:
                    trace[ntrace] = _half_ss(r, n) + _shim_penalty(beta, gamma, nl1, nl2)
                    ntrace += 1

            sweeps += 1
            if maxchg < tol and not changed_support:
                if full:
                    converged = 1
                    break
                full = 1
            else:
                full = 0
    return sweeps, bool(converged), degenerate, ntrace
