"""Pure numpy versions of the routines in ``_kernels.pyx``.

Correlation scans work on fixed-size tiles so the working set stays
``O(n * tile)`` and results do not depend on the number of threads.
Coordinate descent follows the compiled loops statement for statement.
"""

from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np

VARIANCE_RTOL = 1e-12
SUPPORT_EPS = 1e-10
ROW_TILE = 128
COL_TILE = 512


def _corr_tile(sz, szz, szy, n, ysum, ydenom):
    mean = sz / n
    ss = szz - sz * mean
    zero = (ss <= VARIANCE_RTOL * szz) | (ss <= 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (szy - mean * ysum) / np.sqrt(np.where(zero, 1.0, ss) * ydenom)
    r[zero] = 0.0
    np.clip(r, -1.0, 1.0, out=r)
    return r, zero


def main_correlations(X, y, ysum, ydenom):
    n = X.shape[0]
    sz = X.sum(axis=0)
    szz = np.einsum("ij,ij->j", X, X)
    szy = y @ X
    r, zero = _corr_tile(sz, szz, szy, n, ysum, ydenom)
    return r, int(zero.sum())


def _pair_tile(X, y, ysum, ydenom, rows, cols):
    n = X.shape[0]
    A = X[:, rows]
    B = X[:, cols]
    sz = A.T @ B
    szz = (A * A).T @ (B * B)
    szy = (A * y[:, None]).T @ B
    return _corr_tile(sz, szz, szy, n, ysum, ydenom)


def pair_row(X, y, ysum, ydenom, j, out):
    p = X.shape[1]
    nz = 0
    for start in range(j + 1, p, COL_TILE):
        stop = min(start + COL_TILE, p)
        r, zero = _pair_tile(X, y, ysum, ydenom, slice(j, j + 1), slice(start, stop))
        out[start - j - 1:stop - j - 1] = r[0]
        nz += int(zero.sum())
    return nz


def _acor_tile(X, y, ysum, ydenom, r0, r1, c0, c1):
    """Best partner per row and per column of one upper-triangle tile.

    Only pairs with ``k > j`` count, so every pair is evaluated once and
    its value is shared by both endpoints.
    """
    r, zero = _pair_tile(X, y, ysum, ydenom, slice(r0, r1), slice(c0, c1))
    a = np.abs(r)
    upper = np.arange(c0, c1)[None, :] > np.arange(r0, r1)[:, None]
    a[~upper] = -1.0
    nz = int((zero & upper).sum())
    kr = np.argmax(a, axis=1)
    kc = np.argmax(a, axis=0)
    return (nz, a[np.arange(r1 - r0), kr], c0 + kr + 1,
            a[kc, np.arange(c1 - c0)], r0 + kc + 1)


def _merge(best, part, lo, v, lab):
    """Fold candidates into ``best``/``part``; equal scores keep the smaller label."""
    b = best[lo:lo + v.shape[0]]
    q = part[lo:lo + v.shape[0]]
    take = (v > b) | ((v == b) & (lab < q))
    b[take] = v[take]
    q[take] = lab[take]


def acor_scan(X, y, ysum, ydenom, threads=1):
    p = X.shape[1]
    main, nz = main_correlations(X, y, ysum, ydenom)
    best = np.abs(main)
    part = np.zeros(p, dtype=np.int64)
    tiles = [(r0, min(r0 + ROW_TILE, p), c0, min(c0 + COL_TILE, p))
             for r0 in range(0, p, ROW_TILE)
             for c0 in range((r0 // COL_TILE) * COL_TILE, p, COL_TILE)]

    def one(t):
        return _acor_tile(X, y, ysum, ydenom, *t)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = pool.map(one, tiles)
            for t, res in zip(tiles, results):
                nz += _fold(best, part, t, res)
    else:
        for t in tiles:
            nz += _fold(best, part, t, one(t))
    return best, part, nz


def _fold(best, part, t, res):
    nz, vr, lr, vc, lc = res
    _merge(best, part, t[0], vr, lr)
    _merge(best, part, t[2], vc, lc)
    return nz


# ---------------------------------------------------------------------------


def _solve_half(a, cp, w, s1, s2, tol, maxit):
    lo, hi = 0.0, cp / a
    if w <= 0.0 or (s1 <= 0.0 and s2 <= 0.0):
        return hi, 0
    fb = 0
    u = hi
    for _ in range(maxit):
        g = a * u - cp
        gp = a
        for s in (s1, s2):
            if s > 0.0:
                q = math.sqrt(u * u + s * s)
                g += w * u / q
                gp += w * s * s / (q * q * q)
        if g == 0.0:
            return u, fb
        if g > 0.0:
            hi = u
        else:
            lo = u
        un = u - g / gp
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
            fb += 1
        if abs(un - u) <= tol * (1.0 + abs(u)) or hi - lo <= tol * (1.0 + hi):
            return un, fb
        u = un
    return 0.5 * (lo + hi), fb + 1


def solve1d(a, c, t, w, s1=0.0, s2=0.0, tol=1e-10, maxit=100):
    if a <= 0.0 or abs(c) <= t:
        return 0.0, 0
    u, fb = _solve_half(a, abs(c) - t, w, s1, s2, tol, maxit)
    return math.copysign(u, c), fb


def _gresh_penalty(beta, d, members, nl1, nl2):
    g = beta[:d] ** 2 + (beta[members] ** 2).sum(axis=1)
    return nl2 * np.sqrt(g).sum() + nl1 * np.abs(beta[d:]).sum()


def gresh_objective_kernel(r, beta, d, members, lam1, lam2):
    n = r.shape[0]
    return 0.5 * float(r @ r) + _gresh_penalty(beta, d, members, n * lam1, n * lam2)


def gresh_cd(Z, colsq, beta, b0, r, d, pair_a, pair_b, members, lam1, lam2,
             tol, max_sweeps, newton_tol, newton_maxit, trace=None):
    n, m = Z.shape
    nl1, nl2 = n * lam1, n * lam2
    fb = sweeps = ntrace = 0
    converged = False
    full = True
    cap = 0 if trace is None else trace.shape[0]

    def record():
        nonlocal ntrace
        if ntrace < cap:
            trace[ntrace] = 0.5 * float(r @ r) + _gresh_penalty(beta, d, members, nl1, nl2)
            ntrace += 1

    while sweeps < max_sweeps:
        maxchg = 0.0
        changed = False
        mean = r.mean()
        b0[0] += mean
        r -= mean
        maxchg = max(maxchg, abs(mean))
        record()
        for c in range(m):
            old = beta[c]
            if not full and old == 0.0:
                continue
            cc = float(Z[:, c] @ r) + colsq[c] * old
            if c < d:
                s = math.sqrt(float((beta[members[c]] ** 2).sum()))
                if s == 0.0:
                    new, k = solve1d(colsq[c], cc, nl2, nl2, 0.0, 0.0, newton_tol, newton_maxit)
                else:
                    new, k = solve1d(colsq[c], cc, 0.0, nl2, s, 0.0, newton_tol, newton_maxit)
            else:
                a, b = pair_a[c - d], pair_b[c - d]
                ma, mb = members[a], members[b]
                sa = math.sqrt(beta[a] ** 2 + float((beta[ma[ma != c]] ** 2).sum()))
                sb = math.sqrt(beta[b] ** 2 + float((beta[mb[mb != c]] ** 2).sum()))
                t = nl1 + nl2 * ((sa == 0.0) + (sb == 0.0))
                new, k = solve1d(colsq[c], cc, t, nl2, sa, sb, newton_tol, newton_maxit)
            fb += k
            if new != old:
                r -= (new - old) * Z[:, c]
                beta[c] = new
                maxchg = max(maxchg, abs(new - old))
                changed |= (old == 0.0) != (new == 0.0) and abs(new - old) > SUPPORT_EPS
            record()
        sweeps += 1
        if maxchg < tol and not changed:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    return sweeps, converged, fb, ntrace


def shim_cd(Z, colsq, beta, gamma, b0, r, d, pair_a, pair_b, members, lam1, lam2,
            tol, max_sweeps, w, trace=None):
    n, m = Z.shape
    nl1, nl2 = n * lam1, n * lam2
    sweeps = ntrace = degenerate = 0
    converged = False
    full = True
    cap = 0 if trace is None else trace.shape[0]

    def record():
        nonlocal ntrace
        if ntrace < cap:
            trace[ntrace] = (0.5 * float(r @ r) + nl2 * np.abs(beta).sum()
                             + nl1 * np.abs(gamma).sum())
            ntrace += 1

    def soft(c, t):
        return math.copysign(max(abs(c) - t, 0.0), c)

    while sweeps < max_sweeps:
        maxchg = 0.0
        changed = False
        mean = r.mean()
        b0[0] += mean
        r -= mean
        maxchg = max(maxchg, abs(mean))
        record()

        for a in range(d):
            old = beta[a]
            if not full and old == 0.0:
                continue
            w[:] = Z[:, a]
            for col in members[a]:
                g = gamma[col - d]
                if g == 0.0:
                    continue
                other = pair_b[col - d] if pair_a[col - d] == a else pair_a[col - d]
                f = g * beta[other]
                if f != 0.0:
                    w += f * Z[:, col]
            aa = float(w @ w)
            if aa <= 0.0:
                continue
            cc = float(w @ r) + aa * old
            new = soft(cc, nl2) / aa
            if new != old:
                r -= (new - old) * w
                beta[a] = new
                maxchg = max(maxchg, abs(new - old))
                changed |= (old == 0.0) != (new == 0.0) and abs(new - old) > SUPPORT_EPS
            record()

        for c in range(d, m):
            old = gamma[c - d]
            if not full and old == 0.0:
                continue
            prod = beta[pair_a[c - d]] * beta[pair_b[c - d]]
            if prod == 0.0:
                if old != 0.0:
                    gamma[c - d] = 0.0
                    changed = True
                degenerate += 1
                continue
            aa = prod * prod * colsq[c]
            if aa <= 0.0:
                continue
            cc = prod * float(Z[:, c] @ r) + aa * old
            new = soft(cc, nl1) / aa
            if new != old:
                r -= prod * (new - old) * Z[:, c]
                gamma[c - d] = new
                maxchg = max(maxchg, abs(prod * (new - old)))
                changed |= (old == 0.0) != (new == 0.0) and abs(new - old) > SUPPORT_EPS
            record()

        sweeps += 1
        if maxchg < tol and not changed:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    return sweeps, converged, degenerate, ntrace
