import numpy as np
import pytest
from hypothesis import settings

from sego.synth import ScenarioConfig

from helpers import VERDICTS

settings.register_profile("sego", max_examples=60, deadline=None)
settings.load_profile("sego")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        passed, detail = VERDICTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noiseless():
    return ScenarioConfig()

