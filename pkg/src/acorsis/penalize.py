"""Second-stage selection on a screened variable set.

Two hierarchy-respecting least-squares penalties are fitted by coordinate
descent over the full quadratic model of the screened variables:

* GRESH: a group norm over ``(beta_j, beta_jk for all k)`` for every
  variable plus an l1 term on the interactions.  An interaction can only
  leave zero while both parent groups are non-empty, which yields strong
  hierarchy at the solution.
* SHIM: ``beta_jk = gamma_jk * beta_j * beta_k`` with l1 penalties on
  ``beta`` and ``gamma``.

The tuning parameter is picked along a warm-started path by the
generalized information criterion ``-2 loglik + kappa * df``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _backend
from .core import BINOMIAL, GAUSSIAN, Dataset
from .errors import DimensionMismatch, IndexOutOfRange, MaxSweepsExceeded

log = logging.getLogger(__name__)

SNAP = 1e-10
BLOCK_ROUNDS = 50
GRESH = "gresh"
SHIM = "shim"
METHODS = (GRESH, SHIM)


@dataclass(frozen=True)
class PenaltyConfig:
    method: str = GRESH
    lambda1: float = 0.0
    lambda2: float | None = None
    r: int = 2
    tol: float = 1e-6
    max_sweeps: int = 1000
    newton_tol: float = 1e-10
    newton_maxit: int = 100

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.lambda1 < 0 or (self.lambda2 is not None and self.lambda2 < 0):
            raise ValueError("penalty levels must be nonnegative")
        if self.r != 2:
            raise ValueError("only r = 2 is supported")

    @property
    def lam2(self) -> float:
        if self.lambda2 is not None:
            return self.lambda2
        return 0.5 * self.lambda1 if self.method == GRESH else self.lambda1

    def at(self, lambda1: float) -> "PenaltyConfig":
        """Same settings at a new ``lambda1`` with ``lambda2`` re-derived."""
        return replace(self, lambda1=lambda1, lambda2=None)


@dataclass
class CoefficientSet:
    """Sparse quadratic model ``b0 + sum b_j x_j + sum b_jk x_j x_k``.

    ``main`` covers every screened variable (zeros included) and ``inter``
    every screened pair.
    """

    beta0: float
    main: dict
    inter: dict
    method: str = GRESH
    family: str = GAUSSIAN
    lambda1: float = 0.0
    lambda2: float = 0.0
    converged: bool = True
    sweeps: int = 0
    gamma: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def support_main(self) -> list:
        return sorted(j for j, b in self.main.items() if b != 0.0)

    @property
    def support_inter(self) -> list:
        return sorted(e for e, b in self.inter.items() if b != 0.0)

    @property
    def n_main(self) -> int:
        return len(self.support_main)

    @property
    def n_inter(self) -> int:
        return len(self.support_inter)

    @property
    def df(self) -> int:
        """Nonzero coefficients, intercept included."""
        return 1 + self.n_main + self.n_inter

    def linear_predictor(self, ds: Dataset) -> np.ndarray:
        eta = np.full(ds.n, self.beta0)
        for j, b in self.main.items():
            if b:
                eta += b * ds.column(j)
        for (j, k), b in self.inter.items():
            if b:
                eta += b * ds.column(j) * ds.column(k)
        return eta


class ShCheck(NamedTuple):
    satisfied: bool
    violations: list


def check_sh(model: CoefficientSet) -> ShCheck:
    """Every nonzero interaction must have both parent mains nonzero."""
    bad = [e for e in model.support_inter
           if model.main.get(e[0], 0.0) == 0.0 or model.main.get(e[1], 0.0) == 0.0]
    return ShCheck(not bad, bad)


# ---------------------------------------------------------------------------
# screened design


class ShrunkDesign:
    """Main and interaction columns of the screened variables.

    Column order: the ``d`` mains in ascending label order, then pairs in
    lexicographic order.  ``members[a]`` lists the interaction columns
    touching main slot ``a``.
    """

    def __init__(self, ds: Dataset, labels):
        labels = tuple(sorted(int(j) for j in labels))
        if not labels:
            raise DimensionMismatch("empty screened set")
        if labels[0] < 1 or labels[-1] > ds.p or len(set(labels)) != len(labels):
            raise IndexOutOfRange(f"screened labels must be distinct and in 1..{ds.p}")
        d = len(labels)
        slots = list(itertools.combinations(range(d), 2))
        n = ds.n
        Z = np.empty((n, d + len(slots)), order="F")
        Z[:, :d] = ds.X[:, [j - 1 for j in labels]]
        for c, (a, b) in enumerate(slots):
            np.multiply(Z[:, a], Z[:, b], out=Z[:, d + c])
        members = np.zeros((d, max(d - 1, 0)), dtype=np.int64)
        fill = [0] * d
        for c, (a, b) in enumerate(slots):
            members[a, fill[a]] = d + c
            fill[a] += 1
            members[b, fill[b]] = d + c
            fill[b] += 1
        self.ds = ds
        self.labels = labels
        self.d = d
        self.pairs = [(labels[a], labels[b]) for a, b in slots]
        self.Z = Z
        self.colsq = np.einsum("ij,ij->j", Z, Z)
        self.pair_a = np.array([a for a, _ in slots], dtype=np.int64)
        self.pair_b = np.array([b for _, b in slots], dtype=np.int64)
        self.members = members
        self.y = np.array(ds.y)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def m(self) -> int:
        return self.Z.shape[1]

    def vector(self, model: CoefficientSet) -> np.ndarray:
        beta = np.zeros(self.m)
        for a, j in enumerate(self.labels):
            beta[a] = model.main.get(j, 0.0)
        for c, e in enumerate(self.pairs):
            beta[self.d + c] = model.inter.get(e, 0.0)
        return beta

    def residual(self, beta, b0) -> np.ndarray:
        return self.y - b0 - self.Z @ beta

    def coefficients(self, beta, b0, **kw) -> CoefficientSet:
        main = {j: float(beta[a]) for a, j in enumerate(self.labels)}
        inter = {e: float(beta[self.d + c]) for c, e in enumerate(self.pairs)}
        return CoefficientSet(float(b0), main, inter, **kw)


def _labels(S):
    return getattr(S, "indices", S)


def _design(ds, S, design):
    if design is not None:
        return design
    return ShrunkDesign(ds, _labels(S))


def _snap(v):
    v[np.abs(v) < SNAP] = 0.0
    return v


def _penalty(beta, design, lam1, lam2):
    d, n = design.d, design.n
    g = beta[:d] ** 2 + (beta[design.members] ** 2).sum(axis=1)
    return n * lam2 * np.sqrt(g).sum() + n * lam1 * np.abs(beta[d:]).sum()


def gresh_objective(ds: Dataset, S, model: CoefficientSet, cfg: PenaltyConfig,
                    design: ShrunkDesign | None = None) -> float:
    """Half residual sum of squares plus the group and l1 penalties."""
    des = _design(ds, S, design)
    beta = des.vector(model)
    r = des.residual(beta, model.beta0)
    return 0.5 * float(r @ r) + float(_penalty(beta, des, cfg.lambda1, cfg.lam2))


def shim_objective(ds: Dataset, S, model: CoefficientSet, cfg: PenaltyConfig,
                   design: ShrunkDesign | None = None) -> float:
    des = _design(ds, S, design)
    beta = des.vector(model)
    r = des.residual(beta, model.beta0)
    g = np.array([model.gamma.get(e, 0.0) for e in des.pairs]) if model.gamma else 0.0
    n = des.n
    return (0.5 * float(r @ r) + n * cfg.lam2 * np.abs(beta[:des.d]).sum()
            + n * cfg.lambda1 * np.abs(g).sum())


# ---------------------------------------------------------------------------
# single-coordinate updates


def update_main(x, partial_residual, xi_norm: float, lam2: float,
                cfg: PenaltyConfig | None = None, backend=None) -> float:
    """Minimizer over ``b`` of ``1/2 |r - b x|^2 + n lam2 sqrt(b^2 + xi^2)``.

    ``partial_residual`` excludes the current contribution of ``x``.
    """
    K = _backend.get(backend)
    cfg = cfg or PenaltyConfig()
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    a = float(x @ x)
    c = float(x @ np.asarray(partial_residual, dtype=np.float64))
    nl2 = n * lam2
    if xi_norm == 0.0:
        u, _ = K.solve1d(a, c, nl2, nl2, 0.0, 0.0, cfg.newton_tol, cfg.newton_maxit)
    else:
        u, _ = K.solve1d(a, c, 0.0, nl2, float(xi_norm), 0.0, cfg.newton_tol, cfg.newton_maxit)
    return float(u)


def update_interaction(z, partial_residual, s_j: float, s_k: float, lam1: float,
                       lam2: float, cfg: PenaltyConfig | None = None, backend=None) -> float:
    """Minimizer over ``b`` of ``1/2 |r - b z|^2 + n lam1 |b|
    + n lam2 [sqrt(b^2 + s_j^2) + sqrt(b^2 + s_k^2)]``.

    ``s_j`` is the norm of the rest of ``j``'s group (its main effect and
    every other interaction of ``j``); likewise ``s_k``.
    """
    K = _backend.get(backend)
    cfg = cfg or PenaltyConfig()
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    a = float(z @ z)
    c = float(z @ np.asarray(partial_residual, dtype=np.float64))
    t = n * lam1 + n * lam2 * ((s_j == 0.0) + (s_k == 0.0))
    u, _ = K.solve1d(a, c, t, n * lam2, float(s_j), float(s_k),
                     cfg.newton_tol, cfg.newton_maxit)
    return float(u)


# ---------------------------------------------------------------------------
# fits


def _finish(model, strict):
    if not model.converged:
        log.warning("coordinate descent stopped at %d sweeps", model.sweeps)
        if strict:
            raise MaxSweepsExceeded(model, model.sweeps)
    return model


def _gresh_run(des, cfg, beta, b0, K, trace=None):
    r = des.residual(beta, b0[0])
    sweeps, conv, fb, nt = K.gresh_cd(
        des.Z, des.colsq, beta, b0, r, des.d, des.pair_a, des.pair_b, des.members,
        cfg.lambda1, cfg.lam2, cfg.tol, cfg.max_sweeps, cfg.newton_tol,
        cfg.newton_maxit, trace)
    return sweeps, conv, fb, nt


GROUP_SMALL = 1e-3


def _partners(des, a):
    inter = des.members[a]
    other = np.where(des.pair_a[inter - des.d] == a, des.pair_b[inter - des.d],
                     des.pair_a[inter - des.d])
    return inter, other


def _zero_violation(g, w, nl2):
    """Excess of ``|soft(g, w)|`` over ``n lam2``; zero is block-optimal iff <= 0."""
    s = np.maximum(np.abs(g) - w, 0.0)
    return float(np.sqrt(s @ s)) - nl2 * (1.0 + 1e-9) - 1e-12


def _block_minimize(Zb, r, w, xi2, nl2, iters=500):
    """Proximal gradient for one group block, others fixed.

    Minimizes ``1/2 |r - Zb b|^2 + nl2 |b| + sum w_i |b_i|
    + nl2 sum_{xi_i > 0} sqrt(b_i^2 + xi_i^2)`` starting from zero.
    """
    smooth = xi2 > 0.0
    xs = np.where(smooth, xi2, 1.0)
    L = np.linalg.norm(Zb, 2) ** 2
    if smooth.any():
        L += nl2 / math.sqrt(xs[smooth].min())
    b = np.zeros(Zb.shape[1])
    for _ in range(iters):
        grad = -(Zb.T @ (r - Zb @ b))
        grad[smooth] += nl2 * b[smooth] / np.sqrt(b[smooth] ** 2 + xs[smooth])
        v = b - grad / L
        v = np.sign(v) * np.maximum(np.abs(v) - w / L, 0.0)
        nv = float(np.sqrt(v @ v))
        v *= max(0.0, 1.0 - nl2 / (L * nv)) if nv > 0.0 else 0.0
        done = np.abs(v - b).max() <= 1e-12 * (1.0 + np.abs(v).max())
        b = v
        if done:
            break
    return b


def _block_pass(des, beta, r, lam1, lam2):
    """Whole-group moves that single-coordinate updates cannot make.

    A group is main ``j`` with all of its interactions.  At a converged
    coordinate-descent point two things can still be wrong: a group that
    should be exactly zero only decays toward zero (every coordinate sees
    the rest of the group as nonzero), and an all-zero group can be stuck
    at the kink of its norm although a joint move lowers the objective.
    Zero is block-optimal iff ``|soft(Z_B' r_B, w)| <= n lam2``, where
    ``r_B`` excludes the group and an interaction's weight ``w`` is
    ``n lam1``, plus ``n lam2`` when its partner group is otherwise zero.
    Small groups meeting the condition are set to zero; zero groups
    violating it get a block minimization.  Both moves lower the objective.
    Updates ``beta`` and ``r``; returns whether anything changed.
    """
    d, n = des.d, des.n
    nl1, nl2 = n * lam1, n * lam2
    changed = False
    gn2 = beta[:d] ** 2 + (beta[des.members] ** 2).sum(axis=1)
    for a in np.flatnonzero(gn2 < GROUP_SMALL ** 2):
        inter, other = _partners(des, a)
        # partner group norms without the shared interaction
        pm = des.members[other]
        xi2 = beta[other] ** 2 + np.where(pm == inter[:, None], 0.0, beta[pm] ** 2).sum(axis=1)
        cols = np.concatenate(([a], inter))
        w = np.concatenate(([0.0], nl1 + np.where(xi2 == 0.0, nl2, 0.0)))
        Zb = des.Z[:, cols]
        bB = beta[cols].copy()
        if bB.any():
            rB = r + Zb @ bB
            if _zero_violation(Zb.T @ rB, w, nl2) <= 0.0:
                r[:] = rB
                beta[cols] = 0.0
                changed = True
            continue
        if _zero_violation(Zb.T @ r, w, nl2) <= 0.0:
            continue
        b = _block_minimize(Zb, r, w, np.concatenate(([0.0], xi2)), nl2)
        if b.any():
            beta[cols] = b
            r -= Zb @ b
            changed = True
    return changed


def gresh_fit(ds: Dataset, S, cfg: PenaltyConfig | None = None, warm=None,
              design: ShrunkDesign | None = None, trace=None, backend=None,
              strict: bool = False) -> CoefficientSet:
    """Coordinate descent for the GRESH objective on the screened set ``S``.

    ``warm`` may be a previous CoefficientSet.  ``trace`` (a float array)
    receives the objective after every single update.
    """
    cfg = cfg or PenaltyConfig()
    if ds.family != GAUSSIAN:
        raise ValueError("gresh_fit needs a gaussian dataset")
    K = _backend.get(backend)
    des = _design(ds, S, design)
    beta = des.vector(warm) if warm is not None else np.zeros(des.m)
    b0 = np.array([warm.beta0 if warm is not None else 0.0])
    sweeps, conv, fb, nt = _gresh_run(des, cfg, beta, b0, K, trace)
    rounds = 0
    while conv and rounds < BLOCK_ROUNDS:
        r = des.residual(beta, b0[0])
        if not _block_pass(des, beta, r, cfg.lambda1, cfg.lam2):
            break
        rounds += 1
        if trace is not None and nt < trace.shape[0]:
            trace[nt] = 0.5 * float(r @ r) + _penalty(beta, des, cfg.lambda1, cfg.lam2)
            nt += 1
        more, conv, f2, n2 = _gresh_run(des, cfg, beta, b0, K,
                                        None if trace is None else trace[nt:])
        sweeps, fb, nt = sweeps + more, fb + f2, nt + n2
    _snap(beta)
    model = des.coefficients(beta, b0[0], method=GRESH, lambda1=cfg.lambda1,
                             lambda2=cfg.lam2, converged=bool(conv), sweeps=int(sweeps))
    model.extra.update(newton_fallbacks=int(fb), trace_len=int(nt))
    return _finish(model, strict)


def shim_fit(ds: Dataset, S, cfg: PenaltyConfig | None = None, warm=None,
             design: ShrunkDesign | None = None, trace=None, backend=None,
             strict: bool = False) -> CoefficientSet:
    """Coordinate descent for SHIM; interactions are ``gamma_jk beta_j beta_k``."""
    cfg = cfg or PenaltyConfig(method=SHIM)
    if ds.family != GAUSSIAN:
        raise ValueError("shim_fit needs a gaussian dataset")
    K = _backend.get(backend)
    des = _design(ds, S, design)
    d = des.d
    beta = np.zeros(d)
    gamma = np.zeros(des.m - d)
    b0 = np.array([0.0])
    if warm is not None:
        beta[:] = des.vector(warm)[:d]
        if warm.gamma:
            gamma[:] = [warm.gamma.get(e, 0.0) for e in des.pairs]
        b0[0] = warm.beta0
    full = np.zeros(des.m)
    full[:d] = beta
    full[d:] = gamma * beta[des.pair_a] * beta[des.pair_b]
    r = des.residual(full, b0[0])
    w = np.empty(des.n)
    sweeps, conv, degen, nt = K.shim_cd(
        des.Z, des.colsq, beta, gamma, b0, r, d, des.pair_a, des.pair_b, des.members,
        cfg.lambda1, cfg.lam2, cfg.tol, cfg.max_sweeps, w, trace)
    _snap(beta)
    gamma[beta[des.pair_a] * beta[des.pair_b] == 0.0] = 0.0
    full[:d] = beta
    full[d:] = _snap(gamma * beta[des.pair_a] * beta[des.pair_b])
    model = des.coefficients(full, b0[0], method=SHIM, lambda1=cfg.lambda1,
                             lambda2=cfg.lam2, converged=bool(conv), sweeps=int(sweeps))
    model.gamma = {e: float(g) for e, g in zip(des.pairs, gamma)}
    model.extra.update(degenerate_updates=int(degen), trace_len=int(nt))
    return _finish(model, strict)


FITTERS = {GRESH: gresh_fit, SHIM: shim_fit}


# ---------------------------------------------------------------------------
# tuning


def default_kappa(n: int, p: int) -> float:
    """``log p * log log n``."""
    return math.log(p) * math.log(math.log(n))


def lambda_max(des: ShrunkDesign, method: str = GRESH, ratio: float = 0.5) -> float:
    """Smallest ``lambda1`` at which the all-zero fit is optimal.

    GRESH with ``lambda2 = ratio * lambda1``: a main stays at zero while
    ``|x_j'r| <= n lambda2``, an interaction while
    ``|z_jk'r| <= n (lambda1 + 2 lambda2)``.  SHIM: only the mains matter.
    """
    r = des.y - des.y.mean()
    g = np.abs(des.Z.T @ r) / des.n
    if method == SHIM:
        return float(g[:des.d].max())
    lm = g[:des.d].max() / ratio
    if des.m > des.d:
        lm = max(lm, g[des.d:].max() / (1.0 + 2.0 * ratio))
    return float(lm)


def gaussian_loglik(rss: float, n: int) -> float:
    sigma2 = max(rss / n, np.finfo(float).tiny)
    return -0.5 * n * (1.0 + math.log(2 * math.pi)) - 0.5 * n * math.log(sigma2)


@dataclass
class GicResult:
    lambda_grid: np.ndarray
    loglik: np.ndarray
    df: np.ndarray
    sigma2: np.ndarray
    gic: np.ndarray
    converged: np.ndarray
    chosen: int
    kappa: float
    fits: list = field(repr=False, default_factory=list)

    @property
    def best(self) -> CoefficientSet:
        return self.fits[self.chosen]

    @property
    def lambda_chosen(self) -> float:
        return float(self.lambda_grid[self.chosen])

    def rows(self):
        """``(lambda, loglik, df, sigma2, gic, converged)`` per grid point."""
        for i in range(self.lambda_grid.shape[0]):
            yield (float(self.lambda_grid[i]), float(self.loglik[i]), int(self.df[i]),
                   float(self.sigma2[i]), float(self.gic[i]), bool(self.converged[i]))


def lambda_grid(lmax: float, n_lambda: int = 50, ratio: float = 0.01) -> np.ndarray:
    return lmax * np.geomspace(1.0, ratio, n_lambda)


def lambda_path_gic(ds: Dataset, S, method: str = GRESH, kappa: float | None = None,
                    n_lambda: int = 50, min_ratio: float = 0.01,
                    cfg: PenaltyConfig | None = None, backend=None,
                    design: ShrunkDesign | None = None) -> GicResult:
    """Warm-started path from ``lambda_max`` down to ``min_ratio * lambda_max``,
    scored by ``-2 loglik + kappa * df``.

    ``kappa`` defaults to ``log p * log log n`` with the full ``p`` of ``ds``.
    Non-converged grid points are flagged and skipped by the argmin.
    """
    cfg = replace(cfg, method=method) if cfg is not None else PenaltyConfig(method=method)
    des = _design(ds, S, design)
    if kappa is None:
        kappa = default_kappa(ds.n, ds.p)
    lmax = lambda_max(des, method)
    if lmax <= 0.0:
        lmax = 1.0
    grid = lambda_grid(lmax, n_lambda, min_ratio)
    fit = FITTERS[method]
    n = des.n
    L = grid.shape[0]
    ll, df, s2, gic = np.empty(L), np.empty(L, dtype=np.int64), np.empty(L), np.empty(L)
    conv = np.zeros(L, dtype=bool)
    fits = []
    warm = None
    for i, lam in enumerate(grid):
        model = fit(ds, des.labels, cfg.at(float(lam)), warm=warm, design=des, backend=backend)
        rss = float(np.sum(des.residual(des.vector(model), model.beta0) ** 2))
        s2[i] = rss / n
        ll[i] = gaussian_loglik(rss, n)
        df[i] = model.df
        gic[i] = -2.0 * ll[i] + kappa * df[i]
        conv[i] = model.converged
        model.extra.update(loglik=ll[i], sigma2=s2[i], gic=gic[i])
        fits.append(model)
        warm = model
    if not conv.any():
        raise MaxSweepsExceeded(fits[-1], cfg.max_sweeps)
    masked = np.where(conv, gic, np.inf)
    chosen = int(np.argmin(masked))
    return GicResult(grid, ll, df, s2, gic, conv, chosen, float(kappa), fits)


# logistic pipeline lives in its own module; re-exported here
from .logistic import binomial_deviance, logistic_select, prediction_deviance  # noqa: E402,F401
