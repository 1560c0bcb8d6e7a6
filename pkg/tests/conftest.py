import sys

import numpy as np
import pytest

from fovzoom.array_model import default_geometry
from fovzoom.signal_core import StftConfig

FS = 16000


@pytest.fixture
def geometry():
    return default_geometry()


@pytest.fixture
def cfg():
    return StftConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    RESULTS = getattr(mod, "RESULTS", None)
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
