"""Slow, independent reference implementations used to freeze expected values."""

import itertools
import math

import numpy as np


def corr(u, v):
    u = np.asarray(u, float) - np.mean(u)
    v = np.asarray(v, float) - np.mean(v)
    return float(u @ v / math.sqrt((u @ u) * (v @ v)))


def brute_acor(X, y):
    """Score and smallest maximizing partner label for every variable."""
    n, p = X.shape
    scores, partners = [], []
    for j in range(p):
        best, arg = abs(corr(X[:, j], y)), 0
        for k in range(p):
            if k == j:
                continue
            v = abs(corr(X[:, j] * X[:, k], y))
            if v > best + 1e-13:
                best, arg = v, k + 1
        scores.append(best)
        partners.append(arg)
    return np.array(scores), np.array(partners)


def brute_effect_ranking(X, y, d):
    p = X.shape[1]
    cand = []
    for j in range(0, p + 1):
        for k in range(j + 1, p + 1):
            z = X[:, k - 1] if j == 0 else X[:, j - 1] * X[:, k - 1]
            cand.append((-abs(corr(z, y)), j, k))
    cand.sort()
    return [(j, k) for _, j, k in cand[:d]]


def binary_cor_hand(z, y):
    """Literal term-by-term evaluation of the two-class correlation."""
    n = len(z)
    n1 = sum(1 for v in y if v == 1)
    zbar = sum(z) / n
    s1 = sum(zi - zbar for zi, yi in zip(z, y) if yi == 1)
    s0 = sum(zi - zbar for zi, yi in zip(z, y) if yi == 0)
    num = (n - n1) / n * s1 - n1 / n * s0
    ss = sum((zi - zbar) ** 2 for zi in z)
    return num / math.sqrt(ss * (n1 - 2 * n1 / n + n1 ** 2 / n))


def grid_min_1d(f, lo, hi, step=1e-6, coarse=2001):
    """Minimize a convex 1-D function: coarse scan then a 1e-6 grid around it."""
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, coarse - 1)]
    fine = np.arange(a, b + step, step)
    fv = np.array([f(x) for x in fine])
    i = int(np.argmin(fv))
    return float(fine[i]), float(fv[i])


def grid_objective_min(ds, labels, lam1, lam2, center, half, pts=41, zooms=6):
    """Exhaustive grid over the penalized coefficients (intercept profiled out)."""
    cols = [ds.X[:, j - 1] for j in labels]
    if len(labels) == 2:
        cols.append(cols[0] * cols[1])
    Z = np.column_stack(cols)
    Zc = Z - Z.mean(axis=0)
    yc = ds.y - ds.y.mean()
    G, h, yy, n = Zc.T @ Zc, Zc.T @ yc, yc @ yc, ds.n
    m = Z.shape[1]
    center = np.array(center, float)
    best = None
    for _ in range(zooms):
        axes = [np.linspace(c - half, c + half, pts) for c in center]
        B = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m)
        rss = yy - 2 * B @ h + np.einsum("ij,jk,ik->i", B, G, B)
        if m == 1:
            pen = n * lam2 * np.abs(B[:, 0])
        else:
            b1, b2, b12 = B.T
            pen = n * lam2 * (np.sqrt(b1 ** 2 + b12 ** 2) + np.sqrt(b2 ** 2 + b12 ** 2)) \
                + n * lam1 * np.abs(b12)
        f = 0.5 * rss + pen
        i = int(np.argmin(f))
        if best is None or f[i] < best:
            best = float(f[i])
        center = B[i]
        half = half * 4 / (pts - 1)
    return best


def gresh_objective_naive(y, X, labels, b0, main, inter, lam1, lam2):
    """Loop-by-loop GRESH objective over the screened labels."""
    n = len(y)
    fit = np.full(n, b0)
    for j in labels:
        fit = fit + main.get(j, 0.0) * X[:, j - 1]
    for (j, k), b in inter.items():
        fit = fit + b * X[:, j - 1] * X[:, k - 1]
    loss = 0.5 * sum((yi - fi) ** 2 for yi, fi in zip(y, fit))
    group = 0.0
    for j in labels:
        g = main.get(j, 0.0) ** 2
        for k in labels:
            if k != j:
                g += inter.get((min(j, k), max(j, k)), 0.0) ** 2
        group += math.sqrt(g)
    l1 = sum(abs(b) for b in inter.values())
    return loss + n * lam2 * group + n * lam1 * l1


def sh_submodels(labels):
    """Every (mains, interactions) pair obeying strong hierarchy."""
    labels = sorted(labels)
    for r in range(len(labels) + 1):
        for mains in itertools.combinations(labels, r):
            pairs = list(itertools.combinations(mains, 2))
            for q in range(len(pairs) + 1):
                for inter in itertools.combinations(pairs, q):
                    yield mains, inter


def exhaustive_gic(y, X, labels, kappa):
    """Best SH submodel by -2 loglik + kappa df with OLS fits (df counts the intercept).

    RSS comes from the Gram matrix of the full quadratic design; submodels of
    equal size are solved as one batch.
    """
    n = len(y)
    labels = sorted(labels)
    cols = {(): np.ones(n)}
    for j in labels:
        cols[(j,)] = X[:, j - 1]
    for j, k in itertools.combinations(labels, 2):
        cols[(j, k)] = X[:, j - 1] * X[:, k - 1]
    keys = list(cols)
    pos = {key: i for i, key in enumerate(keys)}
    A = np.column_stack([cols[k] for k in keys])
    G, h, yy = A.T @ A, A.T @ y, float(y @ y)
    by_size = {}
    for mains, inter in sh_submodels(labels):
        idx = [0] + [pos[(j,)] for j in mains] + [pos[e] for e in inter]
        by_size.setdefault(len(idx), []).append((idx, mains, inter))
    best = None
    for m, group in by_size.items():
        I = np.array([g[0] for g in group])
        Gs = G[I[:, :, None], I[:, None, :]]
        hs = h[I]
        coef = np.linalg.solve(Gs, hs[..., None])[..., 0]
        rss = np.maximum(yy - np.einsum("ij,ij->i", hs, coef), 1e-300)
        ll = -0.5 * n * (1 + math.log(2 * math.pi)) - 0.5 * n * np.log(rss / n)
        gic = -2 * ll + kappa * m
        i = int(np.argmin(gic))
        if best is None or gic[i] < best[0]:
            best = (float(gic[i]), set(group[i][1]), set(group[i][2]))
    return best
