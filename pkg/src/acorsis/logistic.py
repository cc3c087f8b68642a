"""Penalized logistic selection over a screened set and held-out deviance.

The pipeline: l1-penalized logistic regression over the screened mains and
their pairwise products with the penalty level picked by GIC, then parent
mains of selected interactions are added back, the model is refitted
without penalty, and interactions are pruned by Wald p-value.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .core import BINOMIAL, Dataset
from .errors import DimensionMismatch

log = logging.getLogger(__name__)

PROB_CLIP = 1e-12
RIDGE = 1e-6
WALD_LEVEL = 0.05


def _sigmoid(eta):
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))


def binomial_deviance(y, prob) -> float:
    """``2 sum y log(y/p) + (1-y) log((1-y)/(1-p))`` with ``0 log 0 = 0``;
    probabilities are clipped to ``[1e-12, 1 - 1e-12]``."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(prob, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    if y.shape != p.shape:
        raise DimensionMismatch(f"shapes {y.shape} and {p.shape} differ")
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / p), 0.0)
        b = np.where(y < 1, (1 - y) * np.log(np.where(y < 1, 1 - y, 1.0) / (1 - p)), 0.0)
    return float(2.0 * (a + b).sum())


def prediction_deviance(model, test: Dataset) -> float:
    """Deviance of ``model``'s predicted probabilities on ``test``."""
    return binomial_deviance(test.y, _sigmoid(model.linear_predictor(test)))


# ---------------------------------------------------------------------------


def _l1_logistic(Z, y, lam, beta, b0, tol=1e-7, max_outer=100, max_inner=1000):
    """Proximal Newton for ``-loglik/n + lam |beta|_1`` (intercept free)."""
    n, m = Z.shape
    for _ in range(max_outer):
        eta = b0 + Z @ beta
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1 - mu), 1e-5)
        u = eta + (y - mu) / w
        r = u - eta
        wz = w[:, None] * Z
        csq = np.einsum("ij,ij->j", wz, Z)
        old_b, old_b0 = beta.copy(), b0
        full = True
        for _it in range(max_inner):
            delta = 0.0
            changed = False
            s = float(w @ r) / float(w.sum())
            b0 += s
            r -= s
            delta = max(delta, abs(s))
            idx = range(m) if full else np.flatnonzero(beta)
            for c in idx:
                if csq[c] <= 0.0:
                    continue
                old = beta[c]
                g = float(wz[:, c] @ r) + csq[c] * old
                new = math.copysign(max(abs(g) - n * lam, 0.0), g) / csq[c]
                if new != old:
                    r -= (new - old) * Z[:, c]
                    beta[c] = new
                    delta = max(delta, abs(new - old))
                    changed |= (old == 0.0) != (new == 0.0)
            if delta < tol and not changed:
                if full:
                    break
                full = True
            else:
                full = False
        if max(np.abs(beta - old_b).max(initial=0.0), abs(b0 - old_b0)) < tol:
            break
    return beta, b0


def _irls(X, y, ridge=0.0, max_iter=50, tol=1e-8):
    """Unpenalized (or ridge) logistic fit with intercept in column 0 of ``X``.

    Returns ``(coef, cov, deviance, ok)``.
    """
    n, m = X.shape
    coef = np.zeros(m)
    dev = binomial_deviance(y, np.full(n, y.mean()))
    P = ridge * np.eye(m)
    P[0, 0] = 0.0
    ok = False
    for _ in range(max_iter):
        eta = X @ coef
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1 - mu), 1e-10)
        H = (X * w[:, None]).T @ X + P
        g = X.T @ (y - mu) - P @ coef
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        for _h in range(30):
            cand = coef + t * step
            nd = binomial_deviance(y, _sigmoid(X @ cand)) + cand @ P @ cand
            if nd <= dev + 1e-12:
                break
            t *= 0.5
        coef = cand
        if abs(dev - nd) < tol:
            dev = nd
            ok = True
            break
        dev = nd
    mu = _sigmoid(X @ coef)
    w = np.maximum(mu * (1 - mu), 1e-10)
    H = (X * w[:, None]).T @ X + P
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov = np.full((m, m), np.nan)
        ok = False
    separated = np.abs(X @ coef).max(initial=0.0) > 30.0 or dev < 1e-6
    return coef, cov, binomial_deviance(y, mu), ok and not separated


def _refit(Z, y, cols):
    X = np.column_stack([np.ones(Z.shape[0])] + [Z[:, c] for c in cols])
    coef, cov, dev, ok = _irls(X, y)
    if not ok:
        log.warning("separation or non-convergence in refit; using ridge %.0e", RIDGE)
        coef, cov, dev, _ = _irls(X, y, ridge=RIDGE)
    se = np.sqrt(np.abs(np.diag(cov)))
    with np.errstate(divide="ignore", invalid="ignore"):
        pval = np.array([math.erfc(abs(b / s) / math.sqrt(2.0)) if s > 0 else 1.0
                         for b, s in zip(coef, se)])
    return coef, pval, dev


def logistic_select(ds: Dataset, S, kappa: float | None = None, n_lambda: int = 50,
                    min_ratio: float = 0.01, design=None):
    """Screened-set selection for a 0/1 response.

    The returned CoefficientSet carries Wald p-values in ``extra["pvalues"]``.
    """
    from .penalize import CoefficientSet, ShrunkDesign, default_kappa

    if ds.family != BINOMIAL:
        raise ValueError("logistic_select needs a binomial dataset")
    des = design or ShrunkDesign(ds, getattr(S, "indices", S))
    Z, y, n, d = des.Z, des.y, des.n, des.d
    if kappa is None:
        kappa = default_kappa(n, ds.p)
    cols_all = list(des.labels) + list(des.pairs)

    lmax = float(np.abs(Z.T @ (y - y.mean())).max()) / n
    beta = np.zeros(des.m)
    b0 = math.log(y.mean() / (1 - y.mean()))
    best = (binomial_deviance(y, np.full(n, y.mean())) + kappa, np.zeros(des.m))
    for lam in lmax * np.geomspace(1.0, min_ratio, n_lambda):
        beta, b0 = _l1_logistic(Z, y, lam, beta, b0)
        beta[np.abs(beta) < 1e-10] = 0.0
        crit = binomial_deviance(y, _sigmoid(b0 + Z @ beta)) + kappa * (1 + np.count_nonzero(beta))
        if crit < best[0]:
            best = (crit, beta.copy())
    chosen = set(np.flatnonzero(best[1]).tolist())
    lasso_terms = [cols_all[c] for c in sorted(chosen)]

    # parents of selected interactions
    repaired = set()
    for c in list(chosen):
        if c >= d:
            for a in (int(des.pair_a[c - d]), int(des.pair_b[c - d])):
                if a not in chosen:
                    repaired.add(a)
                    chosen.add(a)

    def parents(cs):
        return {int(x) for c in cs if c >= d for x in (des.pair_a[c - d], des.pair_b[c - d])}

    cols = sorted(chosen)
    coef, pval, dev = _refit(Z, y, cols)
    while True:
        inter = [(pval[i + 1], c) for i, c in enumerate(cols) if c >= d]
        worst = max(inter, default=None)
        if worst is None or not worst[0] > WALD_LEVEL:
            break
        cols.remove(worst[1])
        log.info("dropping interaction %s (p=%.3g)", cols_all[worst[1]], worst[0])
        # mains that were only there as parents go with their last interaction
        keep = parents(cols)
        cols = [c for c in cols if c not in repaired or c in keep]
        coef, pval, dev = _refit(Z, y, cols)

    full = np.zeros(des.m)
    for i, c in enumerate(cols):
        full[c] = coef[i + 1]
    model = des.coefficients(full, coef[0], method="logistic", family=BINOMIAL)
    model.extra.update(
        pvalues={cols_all[c]: float(pval[i + 1]) for i, c in enumerate(cols)},
        deviance=dev, kappa=float(kappa), gic=float(best[0]), lasso_terms=lasso_terms,
    )
    return model
