import sys

import numpy as np
import pytest

from eitmodes import MediumBeamConfig, SpectrumRequest, solve_spectrum
from eitmodes.decomposition import ModeDecomposer

REF_DELTA = -1e6


@pytest.fixture(scope="session")
def config():
    return MediumBeamConfig.reference()


@pytest.fixture(scope="session")
def modes_m0(config):
    return solve_spectrum(SpectrumRequest([0], 3, REF_DELTA), config)


@pytest.fixture(scope="session")
def modes_m12(config):
    modes = solve_spectrum(SpectrumRequest([1, 2, -1, -2], 3, REF_DELTA), config)
    return {(md.m, md.n): md for md in modes}


@pytest.fixture(scope="session")
def decomposer(config):
    return ModeDecomposer(config=config, delta=REF_DELTA, m_max=2, n_max=4).fit()


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def rng():
    return np.random.default_rng(20061)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(verdicts):
            terminalreporter.write_line(verdicts[number])
