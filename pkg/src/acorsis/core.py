"""Data model, standardization and correlation primitives.

Variables are labelled ``1..p`` throughout the public API; label ``0`` is the
constant column ``x_0 = 1`` so that the pair ``(0, k)`` denotes the main
effect of variable ``k``.  Array positions are 0-based, so variable ``j``
lives in column ``j - 1`` of ``Dataset.X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateBinaryResponse,
    DimensionMismatch,
    IndexOutOfRange,
    ZeroVariance,
    ZeroVarianceColumn,
)

GAUSSIAN = "gaussian"
BINOMIAL = "binomial"
FAMILIES = (GAUSSIAN, BINOMIAL)

# relative tolerance on a sum of squared deviations below which a column is constant
VARIANCE_RTOL = 1e-12


def _readonly(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable response/design pair.

    ``X`` is stored Fortran-ordered so that columns are contiguous.
    """

    y: np.ndarray
    X: np.ndarray
    family: str = GAUSSIAN
    standardized: bool = False
    names: tuple = field(default=())
    response_name: str = "y"
    # column centers/scales used by standardize(), kept to transform held-out data
    x_center: np.ndarray | None = field(default=None, repr=False, compare=False)
    x_scale: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        X = np.asfortranarray(self.X, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"y has shape {y.shape} but X has shape {X.shape}"
            )
        names = tuple(self.names) if self.names else tuple(
            f"x{j}" for j in range(1, X.shape[1] + 1)
        )
        if len(names) != X.shape[1]:
            raise DimensionMismatch(f"{len(names)} names for {X.shape[1]} columns")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n1(self) -> int:
        """Number of class-1 responses (binomial family only)."""
        return int(np.count_nonzero(self.y == 1.0))

    def column(self, j: int) -> np.ndarray:
        """Column of variable label ``j`` (``j = 0`` gives the ones vector)."""
        if j == 0:
            return np.ones(self.n)
        if not 1 <= j <= self.p:
            raise IndexOutOfRange(f"variable {j} outside 1..{self.p}")
        return self.X[:, j - 1]

    def subset(self, rows) -> "Dataset":
        """Rows ``rows`` as a new (unstandardized-flag-preserving) dataset."""
        rows = np.asarray(rows)
        return Dataset(
            self.y[rows], self.X[rows], self.family, self.standardized,
            self.names, self.response_name, self.x_center, self.x_scale,
        )


class EffectIndex(NamedTuple):
    """Effect ``(j, k)`` with ``j < k``; ``j = 0`` is the main effect of ``k``."""

    j: int
    k: int

    def validate(self, p: int) -> "EffectIndex":
        if not (0 <= self.j < self.k <= p):
            raise IndexOutOfRange(f"effect {tuple(self)} invalid for p={p}")
        return self

    @property
    def is_main(self) -> bool:
        return self.j == 0


def _check_binary(y):
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DegenerateBinaryResponse("binomial response must be coded 0/1")
    n1 = int(y.sum())
    if n1 == 0 or n1 == y.shape[0]:
        raise DegenerateBinaryResponse("binomial response has a single class")


def _center_scale(v):
    mu = v.mean()
    c = v - mu
    ss = float(c @ c)
    if ss <= VARIANCE_RTOL * max(float(v @ v), np.finfo(float).tiny):
        return None
    return mu, np.sqrt(v.shape[0] / ss)


def _standardize_vector(v):
    cs = _center_scale(v)
    if cs is None:
        return None
    return (v - cs[0]) * cs[1]


def standardize(raw_y, raw_X, family: str = GAUSSIAN, names=None,
                response_name: str = "y", reference: Dataset | None = None) -> Dataset:
    """Center every column and scale it to squared norm ``n``.

    The response is treated the same way for the gaussian family and left
    as 0/1 for the binomial family.  With ``reference`` the design is
    transformed with the reference's column centers and scales instead
    (held-out data); the response is then only validated.
    """
    y = np.asarray(raw_y, dtype=np.float64)
    X = np.asarray(raw_X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"y has shape {y.shape} but X has shape {X.shape}")
    n, p = X.shape
    if n < 3 or p < 1:
        raise DimensionMismatch(f"need n >= 3 and p >= 1, got n={n}, p={p}")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")

    out = np.empty((n, p), order="F")
    if reference is not None:
        if reference.x_center is None or reference.p != p:
            raise DimensionMismatch("reference dataset has no matching transform")
        out[:] = (X - reference.x_center) * reference.x_scale
        if family == BINOMIAL:
            if not np.all((y == 0.0) | (y == 1.0)):
                raise DegenerateBinaryResponse("binomial response must be coded 0/1")
        return Dataset(y, out, family, True, tuple(names) if names is not None else (),
                       response_name, reference.x_center, reference.x_scale)
    center = np.empty(p)
    scale = np.empty(p)
    for j in range(p):
        cs = _center_scale(X[:, j])
        if cs is None:
            raise ZeroVarianceColumn(j + 1, None if names is None else names[j])
        center[j], scale[j] = cs
        out[:, j] = (X[:, j] - cs[0]) * cs[1]

    if family == BINOMIAL:
        _check_binary(y)
        ys = y.copy()
    else:
        ys = _standardize_vector(y)
        if ys is None:
            raise ZeroVariance("response has zero sample variance")
    return Dataset(ys, out, family, True, tuple(names) if names is not None else (),
                   response_name, _readonly(center), _readonly(scale))


def interaction_column(ds: Dataset, e, out=None) -> np.ndarray:
    """Hadamard product ``x_j * x_k`` for effect ``e = (j, k)``.

    ``j = 0`` returns column ``k`` itself.  The product is not restandardized.
    ``out`` may supply the single length-``n`` buffer to write into.
    """
    j, k = EffectIndex(*e).validate(ds.p)
    xk = ds.X[:, k - 1]
    if out is None:
        out = np.empty(ds.n)
    if j == 0:
        out[:] = xk
    else:
        np.multiply(ds.X[:, j - 1], xk, out=out)
    return out


def pearson(u, v) -> float:
    """Sample Pearson correlation of ``u`` and ``v``.

    Raises ZeroVariance when either vector is constant.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    if u.shape[0] < 3:
        raise DimensionMismatch("pearson needs at least 3 observations")
    uc = u - u.mean()
    vc = v - v.mean()
    suu = float(uc @ uc)
    svv = float(vc @ vc)
    if suu <= VARIANCE_RTOL * float(u @ u) or svv <= VARIANCE_RTOL * float(v @ v) \
            or suu == 0.0 or svv == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    r = float(uc @ vc) / np.sqrt(suu * svv)
    return min(1.0, max(-1.0, r))


def response_denominator(ds: Dataset) -> float:
    """Response factor of the correlation denominator.

    Gaussian: ``sum (y - ybar)^2``.  Binomial: ``n1 - 2 n1/n + n1^2/n`` as in
    the two-class correlation definition.
    """
    if ds.family == BINOMIAL:
        n, n1 = ds.n, ds.n1
        if n1 == 0 or n1 == n:
            raise DegenerateBinaryResponse("binomial response has a single class")
        return n1 - 2.0 * n1 / n + n1 * n1 / n
    yc = ds.y - ds.y.mean()
    return float(yc @ yc)
