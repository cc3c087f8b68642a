import math

import numpy as np
import pytest

from acorsis.core import standardize
from acorsis.penalize import (
    CoefficientSet, binomial_deviance, logistic_select, prediction_deviance,
)


def _logit_data(rng, n, coefs, p=4):
    X = rng.standard_normal((n, p))
    eta = sum(b * (X[:, j - 1] if isinstance(j, int) else X[:, j[0] - 1] * X[:, j[1] - 1])
              for j, b in coefs.items())
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return standardize(y, X, "binomial")


def test_deviance_perfect_prediction():
    y = np.array([0, 1, 1, 0, 1.0])
    assert binomial_deviance(y, y) == pytest.approx(0.0, abs=1e-9)


def test_deviance_half():
    y = np.array([0, 1, 1, 0, 1, 1.0])
    assert binomial_deviance(y, np.full(6, 0.5)) == pytest.approx(12 * math.log(2))


def test_deviance_oracle(rng):
    y = (rng.random(30) < 0.4).astype(float)
    p = rng.uniform(0.01, 0.99, 30)
    ref = 0.0
    for yi, pi in zip(y, p):
        ref += 2 * (yi * math.log(yi / pi) if yi else 0.0)
        ref += 2 * ((1 - yi) * math.log((1 - yi) / (1 - pi)) if yi < 1 else 0.0)
    assert binomial_deviance(y, p) == pytest.approx(ref, rel=1e-12)


def test_prediction_deviance_uses_model(rng):
    ds = _logit_data(rng, 50, {1: 1.0})
    m = CoefficientSet(0.3, {1: 0.8, 2: 0.0}, {(1, 2): 0.0}, family="binomial")
    prob = 1 / (1 + np.exp(-(0.3 + 0.8 * ds.X[:, 0])))
    assert prediction_deviance(m, ds) == pytest.approx(binomial_deviance(ds.y, prob))


def test_intercept_only_when_nothing_survives(rng):
    X = rng.standard_normal((120, 3))
    y = (rng.random(120) < 0.3).astype(float)
    ds = standardize(y, X, "binomial")
    m = logistic_select(ds, [1, 2, 3], kappa=1e6)
    assert m.n_main == 0 and m.n_inter == 0
    prob = 1 / (1 + math.exp(-m.beta0))
    assert prob == pytest.approx(y.mean(), abs=1e-6)


def test_recovers_two_variable_interaction_model():
    hits = 0
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        ds = _logit_data(rng, 500, {1: 1.2, 2: -1.2, (1, 2): 1.5})
        m = logistic_select(ds, [1, 2, 3, 4])
        hits += m.support_main == [1, 2] and m.support_inter == [(1, 2)]
    assert hits >= 4


def test_hierarchy_repair(rng):
    ds = _logit_data(np.random.default_rng(3), 400, {(1, 2): 3.0})
    m = logistic_select(ds, [1, 2, 3])
    assert (1, 2) in m.extra["lasso_terms"]
    assert (1, 2) in m.support_inter
    assert {1, 2} <= set(m.main)
    assert m.main[1] != 0.0 and m.main[2] != 0.0
    assert set(m.extra["pvalues"]) >= {1, 2, (1, 2)}


def test_requires_binomial(rng):
    ds = standardize(rng.standard_normal(20), rng.standard_normal((20, 2)))
    with pytest.raises(ValueError):
        logistic_select(ds, [1, 2])
