import numpy as np
import pytest

from hingegap import projection

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(projection.KERNELS))
def backend(request):
    return request.param


@pytest.fixture(params=projection.MEDIAN_METHODS)
def median(request):
    return request.param
