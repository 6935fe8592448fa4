import numpy as np
import pytest

from doco import mirror, network

ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def unit_box():
    return mirror.FeasibleSet.box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def ring8():
    return network.build_metropolis_weights(network.ring(8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
