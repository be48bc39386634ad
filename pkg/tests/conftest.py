import numpy as np
import pytest
from hypothesis import settings

from panelcup.mc import DgpConfig, generate

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sim40():
    return generate(DgpConfig(n=40, T=40, seed=7))


@pytest.fixture(scope="session")
def sim_exog():
    return generate(DgpConfig(n=30, T=30, sigma21=0.0, sigma31=0.0, seed=11))
