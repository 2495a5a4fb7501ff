import numpy as np
import pytest

from radcomsim.scene import Target, build_fig3_network
from radcomsim.waveform import OfdmConfig, generate_frame

FIG3_TARGET = (6.0, 6.0)


@pytest.fixture(scope="session")
def cfg():
    return OfdmConfig()


@pytest.fixture(scope="session")
def frame(cfg):
    return generate_frame(cfg, 1)


@pytest.fixture(scope="session")
def fig3_scene():
    return build_fig3_network(8, 8, 2.0).with_targets([Target(FIG3_TARGET)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
