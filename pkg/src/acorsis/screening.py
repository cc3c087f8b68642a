"""Variable screening by aggregated correlation, plus the effect-based baseline.

The aggregated correlation of variable ``j`` is the largest absolute
correlation between ``y`` and any product ``x_j * x_k`` (``k = 0`` being the
main effect).  Ranking variables by it keeps both parents of a strong
interaction even when neither main effect matters on its own.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import BINOMIAL, GAUSSIAN, Dataset, EffectIndex, VARIANCE_RTOL, response_denominator
from .errors import (
    DegenerateBinaryResponse,
    DimensionMismatch,
    GlmNonConvergence,
    IndexOutOfRange,
    InvalidGamma,
    ZeroVariance,
)

log = logging.getLogger(__name__)


def default_threads() -> int:
    """Worker count from ``ACORSIS_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ACORSIS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AcorScores:
    """Per-variable aggregated correlation.

    ``scores[i]`` and ``partner[i]`` belong to variable label ``i + 1``;
    ``partner`` is the label of the maximizing partner, 0 for the main effect.
    """

    scores: np.ndarray
    partner: np.ndarray
    n: int
    zero_variance: int = 0
    family: str = GAUSSIAN

    @property
    def p(self) -> int:
        return self.scores.shape[0]

    def ranking(self) -> np.ndarray:
        """Variable labels ordered by decreasing score, ties by ascending label."""
        idx = np.arange(self.p)
        return np.lexsort((idx, -self.scores)) + 1


@dataclass(frozen=True)
class ShrunkSet:
    indices: tuple
    d: int
    gamma: float | None
    clamped: bool = False

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, j):
        return j in self.indices


@dataclass(frozen=True)
class EffectSet:
    """Top-ranked effects in rank order, with their absolute correlations."""

    effects: tuple
    values: np.ndarray = field(repr=False)
    zero_variance: int = 0

    def __len__(self):
        return len(self.effects)

    def variables(self) -> set:
        """Every variable label appearing in a retained effect."""
        out = set()
        for j, k in self.effects:
            out.add(k)
            if j:
                out.add(j)
        return out

    def orphaned_interactions(self) -> list:
        """Retained interactions with at least one parent main effect missing."""
        mains = {k for j, k in self.effects if j == 0}
        return [e for e in self.effects
                if e[0] != 0 and (e[0] not in mains or e[1] not in mains)]

    def hierarchy_complete(self) -> bool:
        return not self.orphaned_interactions()


def _response_terms(ds: Dataset):
    return float(ds.y.sum()), response_denominator(ds)


def _rowmajor(ds: Dataset) -> np.ndarray:
    return np.ascontiguousarray(ds.X)


def acor(ds: Dataset, j: int, backend=None) -> tuple[float, int]:
    """Aggregated correlation of variable ``j`` and its maximizing partner."""
    if not 1 <= j <= ds.p:
        raise IndexOutOfRange(f"variable {j} outside 1..{ds.p}")
    K = _backend.get(backend)
    ysum, yden = _response_terms(ds)
    Xc = _rowmajor(ds)
    main, _ = K.main_correlations(Xc[:, j - 1:j].copy(), ds.y, ysum, yden)
    best, partner = abs(float(main[0])), 0
    # pairs (k, j) with k < j live on row k; (j, k) with k > j on row j
    buf = np.empty(ds.p)
    for k in range(1, j):
        K.pair_row(Xc[:, [k - 1, j - 1]].copy(), ds.y, ysum, yden, 0, buf)
        v = abs(buf[0])
        if v > best:
            best, partner = v, k
    if j < ds.p:
        K.pair_row(Xc, ds.y, ysum, yden, j - 1, buf)
        row = np.abs(buf[:ds.p - j])
        if row.size:
            k = int(np.argmax(row))
            if row[k] > best:
                best, partner = float(row[k]), j + 1 + k
    return best, partner


def acor_all(ds: Dataset, threads: int | None = None, backend=None) -> AcorScores:
    """Aggregated correlation for every variable.

    Works column pair by column pair; the only sizeable allocation is one
    row-major copy of ``X``.  Output is independent of ``threads``.
    """
    K = _backend.get(backend)
    threads = default_threads() if threads is None else max(1, int(threads))
    ysum, yden = _response_terms(ds)
    scores, partner, nz = K.acor_scan(_rowmajor(ds), ds.y, ysum, yden, threads)
    if nz:
        log.warning("%d zero-variance effects scored as 0", nz)
    return AcorScores(scores, partner, ds.n, nz, ds.family)


def binary_acor_all(ds: Dataset, threads: int | None = None, backend=None) -> AcorScores:
    """Aggregated two-class correlation; ``ds`` must be binomial."""
    if ds.family != BINOMIAL:
        raise ValueError("binary_acor_all needs a binomial dataset")
    return acor_all(ds, threads, backend)


def screen_size(n: int, gamma: float | None = None, d: int | None = None) -> int:
    """``d`` if given, else the integer part of ``gamma * n`` (gamma defaults to 1/log n)."""
    if d is not None:
        d = int(d)
        if d < 1:
            raise InvalidGamma(f"screened size must be >= 1, got {d}")
        return d
    if gamma is None:
        gamma = 1.0 / math.log(n)
    if not gamma > 0:
        raise InvalidGamma(f"gamma must be positive, got {gamma}")
    d = int(math.floor(gamma * n))
    if d < 1:
        raise InvalidGamma(f"gamma={gamma} with n={n} keeps no variables")
    return d


def shrunk_variable_set(scores: AcorScores, gamma: float | None = None,
                        d: int | None = None) -> ShrunkSet:
    """Top-``d`` variables by score (ties to the smaller label)."""
    size = screen_size(scores.n, gamma, d)
    clamped = size > scores.p
    if clamped:
        log.warning("screened size %d exceeds p=%d; keeping every variable", size, scores.p)
    keep = scores.ranking()[:min(size, scores.p)]
    return ShrunkSet(tuple(int(j) for j in np.sort(keep)), size,
                     None if d is not None else (gamma if gamma is not None else 1.0 / math.log(scores.n)),
                     clamped)


def all_pairs_sis(ds: Dataset, d: int, backend=None) -> EffectSet:
    """Top-``d`` effects ``(j, k)``, ``0 <= j < k <= p``, by absolute correlation.

    Ties go to the lexicographically smaller pair.  Rows of pair scores are
    streamed and pruned so memory stays ``O(p + d)``.
    """
    if d < 1:
        raise InvalidGamma(f"d must be >= 1, got {d}")
    K = _backend.get(backend)
    ysum, yden = _response_terms(ds)
    Xc = _rowmajor(ds)
    p = ds.p

    main, nz = K.main_correlations(Xc, ds.y, ysum, yden)
    vals = [np.abs(main)]
    js = [np.zeros(p, dtype=np.int64)]
    ks = [np.arange(1, p + 1, dtype=np.int64)]
    pool_v, pool_j, pool_k = _prune(vals, js, ks, d)
    buf = np.empty(p)
    for j in range(p - 1):
        nz += K.pair_row(Xc, ds.y, ysum, yden, j, buf)
        row = np.abs(buf[:p - j - 1])
        thr = pool_v[-1] if pool_v.shape[0] >= d else -1.0
        sel = np.flatnonzero(row >= thr)
        if sel.size == 0:
            continue
        pool_v, pool_j, pool_k = _prune(
            [pool_v, row[sel]], [pool_j, np.full(sel.size, j + 1, dtype=np.int64)],
            [pool_k, sel + j + 2], d)
    effects = tuple(EffectIndex(int(a), int(b)) for a, b in zip(pool_j, pool_k))
    if nz:
        log.warning("%d zero-variance effects scored as 0", nz)
    return EffectSet(effects, pool_v, nz)


def _prune(vals, js, ks, d):
    v = np.concatenate(vals)
    j = np.concatenate(js)
    k = np.concatenate(ks)
    order = np.lexsort((k, j, -v))[:d]
    return v[order], j[order], k[order]


def binary_cor(z, y, n1: int | None = None) -> float:
    """Two-class correlation of ``z`` with a 0/1 response, as defined for
    logistic screening::

        [(n-n1)/n * sum_{y=1}(z - zbar) - n1/n * sum_{y=0}(z - zbar)]
        / sqrt(sum (z - zbar)^2 * (n1 - 2 n1/n + n1^2/n))
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y)
    if z.shape != y.shape:
        raise DimensionMismatch(f"shapes {z.shape} and {y.shape} differ")
    n = z.shape[0]
    ones = y == 1
    if n1 is None:
        n1 = int(ones.sum())
    if n1 <= 0 or n1 >= n:
        raise DegenerateBinaryResponse("both classes must be present")
    zc = z - z.mean()
    szz = float(zc @ zc)
    if szz <= VARIANCE_RTOL * float(z @ z) or szz == 0.0:
        raise ZeroVariance("binary correlation undefined for a constant column")
    num = (n - n1) / n * zc[ones].sum() - n1 / n * zc[~ones].sum()
    den = math.sqrt(szz * (n1 - 2.0 * n1 / n + n1 * n1 / n))
    return float(num / den)


# ---------------------------------------------------------------------------
# aggregated likelihood ratio

IRLS_MAX_ITER = 50
IRLS_TOL = 1e-8
_ETA_CLIP = 30.0


def _bernoulli_dev(y, mu):
    mu = np.clip(mu, 1e-15, 1 - 1e-15)
    return -2.0 * (y[:, None] * np.log(mu) + (1 - y[:, None]) * np.log1p(-mu)).sum(axis=0)


def logistic_lrt_batch(Z: np.ndarray, y: np.ndarray):
    """Likelihood-ratio statistic of ``logit(p) = a + b z`` against the
    intercept-only model, for every column ``z`` of ``Z`` at once.

    Fitted by IRLS with step halving.  Returns ``(lrt, converged, separated)``;
    separated columns get the null deviance.
    """
    n, m = Z.shape
    ybar = y.mean()
    null_dev = -2.0 * n * (ybar * math.log(ybar) + (1 - ybar) * math.log(1 - ybar))
    a = np.full(m, math.log(ybar / (1 - ybar)))
    b = np.zeros(m)
    dev = np.full(m, null_dev)
    done = np.zeros(m, dtype=bool)
    separated = np.zeros(m, dtype=bool)
    for _ in range(IRLS_MAX_ITER):
        act = ~done
        if not act.any():
            break
        Za = Z[:, act]
        eta = np.clip(a[act] + b[act] * Za, -_ETA_CLIP, _ETA_CLIP)
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = np.maximum(mu * (1 - mu), 1e-12)
        u = eta + (y[:, None] - mu) / w
        s0 = w.sum(axis=0)
        s1 = (w * Za).sum(axis=0)
        s2 = (w * Za * Za).sum(axis=0)
        t0 = (w * u).sum(axis=0)
        t1 = (w * Za * u).sum(axis=0)
        det = s0 * s2 - s1 * s1
        det = np.where(det > 0, det, np.nan)
        na = (s2 * t0 - s1 * t1) / det
        nb = (s0 * t1 - s1 * t0) / det
        bad = ~np.isfinite(na) | ~np.isfinite(nb)
        na = np.where(bad, a[act], na)
        nb = np.where(bad, b[act], nb)
        old_dev = dev[act]
        new_dev = _bernoulli_dev(y, 1.0 / (1.0 + np.exp(-np.clip(na + nb * Za, -_ETA_CLIP, _ETA_CLIP))))
        # step halving where the deviance went up
        for _h in range(20):
            worse = new_dev > old_dev + 1e-12
            if not worse.any():
                break
            na = np.where(worse, 0.5 * (na + a[act]), na)
            nb = np.where(worse, 0.5 * (nb + b[act]), nb)
            new_dev = np.where(
                worse,
                _bernoulli_dev(y, 1.0 / (1.0 + np.exp(-np.clip(na + nb * Za, -_ETA_CLIP, _ETA_CLIP)))),
                new_dev)
        idx = np.flatnonzero(act)
        a[idx], b[idx], dev[idx] = na, nb, new_dev
        sep = (new_dev < 1e-6) | (np.abs(nb) * Za.std(axis=0) > _ETA_CLIP)
        separated[idx[sep]] = True
        conv = np.abs(old_dev - new_dev) < IRLS_TOL
        done[idx[conv | sep]] = True
    lrt = np.clip(null_dev - dev, 0.0, null_dev)
    lrt[separated] = null_dev
    return lrt, done, separated


def aggregated_lrt(ds: Dataset, family: str | None = None, details: bool = False,
                   block: int = 256):
    """Aggregated likelihood-ratio statistic of every variable.

    For variable ``j``: the largest likelihood-ratio statistic of a
    single-effect GLM on ``x_j * x_k`` over partners ``k`` (``k = 0`` is the
    main effect).  The gaussian family uses the exact profile likelihood
    ratio ``-n log(1 - r^2)``.  Non-converged fits contribute 0 and are
    reported; separated fits contribute the null deviance.

    With ``details=True`` returns ``(stat, partner, failures)``.
    """
    family = family or ds.family
    n, p = ds.n, ds.p
    best = np.zeros(p)
    partner = np.zeros(p, dtype=np.int64)
    failures = []

    if family == GAUSSIAN:
        def stat(Z):
            zc = Z - Z.mean(axis=0)
            yc = ds.y - ds.y.mean()
            ss = np.einsum("ij,ij->j", zc, zc)
            with np.errstate(invalid="ignore", divide="ignore"):
                r = (yc @ zc) / np.sqrt(ss * float(yc @ yc))
            r = np.where(ss > VARIANCE_RTOL * np.einsum("ij,ij->j", Z, Z), r, 0.0)
            r2 = np.minimum(r * r, 1.0 - 1e-16)
            return -n * np.log1p(-r2), np.ones(Z.shape[1], dtype=bool)
    elif family == BINOMIAL:
        if ds.family != BINOMIAL:
            raise ValueError("binomial likelihood ratio needs a 0/1 response")

        def stat(Z):
            lrt, conv, _ = logistic_lrt_batch(Z, ds.y)
            return np.where(conv, lrt, 0.0), conv
    else:
        raise ValueError(f"unknown family {family!r}")

    X = ds.X

    def update(j, ks, vals):
        # ks ascending; strict comparison keeps the smallest maximizing label
        for k, v in zip(ks, vals):
            if v > best[j - 1]:
                best[j - 1] = v
                partner[j - 1] = k
            if k and v > best[k - 1]:
                best[k - 1] = v
                partner[k - 1] = j

    main, conv = stat(np.asarray(X))
    for j in range(1, p + 1):
        if not conv[j - 1]:
            failures.append((0, j))
        best[j - 1] = main[j - 1]
    for j in range(1, p):
        for k0 in range(j + 1, p + 1, block):
            ks = np.arange(k0, min(k0 + block, p + 1))
            Z = X[:, j - 1:j] * X[:, ks - 1]
            vals, conv = stat(Z)
            for k in ks[~conv]:
                failures.append((j, int(k)))
            update(j, ks, vals)
    if failures:
        for e in failures:
            log.warning("%s", GlmNonConvergence(*e))
    if details:
        return best, partner, failures
    return best
