import hypothesis
import numpy as np
import pytest

from csma.graph import NetworkConfig, gen_named

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def path3():
    return gen_named("path", 3)


@pytest.fixture
def path3_cfg(path3):
    return NetworkConfig(path3, (0.5, 0.5, 0.5), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
