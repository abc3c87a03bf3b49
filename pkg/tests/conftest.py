import numpy as np
import pytest

from w2fair import _kernels

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=sorted(_kernels.available_backends()))
def backend(request):
    return _kernels.available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
