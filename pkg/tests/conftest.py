import numpy as np
import pytest

from acorsis import _backend
from acorsis.core import standardize

BACKENDS = ["python"] + (["cython"] if _backend.HAVE_COMPILED else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_ds(rng, n=40, p=6, family="gaussian", signal=None):
    X = rng.standard_normal((n, p))
    if signal is None:
        y = X[:, 0] * X[:, 1 % p] + 0.5 * X[:, 2 % p] + 0.5 * rng.standard_normal(n)
    else:
        y = signal(X) + rng.standard_normal(n)
    if family == "binomial":
        y = (y > np.median(y)).astype(float)
    return standardize(y, X, family)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
