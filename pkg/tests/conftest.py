import numpy as np
import pytest

from helpers import midway_drive, pair_system
from nvsinglet.dynamics import ResetProtocol


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fig2a():
    """Non-interacting pair at the 0.5 kHz imbalance working point."""
    system = pair_system()
    drive = midway_drive(system, 4.0)
    protocol = ResetProtocol(40e-6, t1_rho=2e-3)
    return system, drive, protocol


@pytest.fixture
def mixed4():
    return np.eye(4, dtype=complex) / 4



def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s[1:].split()[0].rstrip("ab")), s)):
            terminalreporter.write_line(line)
