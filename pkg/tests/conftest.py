import sys

import numpy as np
import pytest

from hardy_ground_states.coupled_ground_states import GammaSpec
from hardy_ground_states.grid import RadialGrid

# all-pairs coupling 2 with unit self-interaction: c = 1/5 for every component
GAMMA_3 = np.array([[1.0, 2.0, 2.0], [2.0, 1.0, 2.0], [2.0, 2.0, 1.0]])


@pytest.fixture
def gamma3():
    return GammaSpec(0.5, GAMMA_3)


@pytest.fixture(scope="session")
def grid4():
    return RadialGrid(4, 1e-4, 1e4, 512)


@pytest.fixture(scope="session")
def grid5():
    return RadialGrid(5, 1e-4, 1e4, 512)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
