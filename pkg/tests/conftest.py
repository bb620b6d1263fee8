import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from clfreqid import lti, signals, sim  # noqa: E402


@pytest.fixture(scope="session")
def bench_sys():
    return lti.benchmark_system()


@pytest.fixture(scope="session")
def excitation():
    return signals.prbs(7)


@pytest.fixture(scope="session")
def omega127():
    return signals.grid(127)


@pytest.fixture(scope="session")
def clean_record(bench_sys, excitation):
    return sim.run_experiment(bench_sys, None, excitation, sim.NoiseConfig(0.0), settle_periods=50)


@pytest.fixture(scope="session")
def noisy_pair(bench_sys, excitation):
    return sim.run_paired_experiments(bench_sys, None, excitation, sim.NoiseConfig(0.1, seed=11),
                                      sim.NoiseConfig(0.1, seed=12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULT_LINES:
            terminalreporter.write_line(line)
