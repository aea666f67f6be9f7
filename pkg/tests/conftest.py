import numpy as np
import pytest

from truncem._backend import AVAILABLE
from truncem.model import custom_powerlaw


@pytest.fixture(params=AVAILABLE)
def backend(request):
    return request.param


@pytest.fixture
def additive_noise():
    """alpha = 0, beta = 1, xi = 1: the scheme reproduces xi + B(t) exactly."""
    return custom_powerlaw(beta=[[1.0, 0.0]], name="additive")


@pytest.fixture
def zero_model():
    return custom_powerlaw(xi=0.7, name="zero")


def dyadic(lo, hi):
    return [2.0 ** -k for k in range(lo, hi + 1)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
