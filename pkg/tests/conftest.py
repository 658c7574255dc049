import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from noma_coexist.config import QosSpec
from noma_coexist.rates import EMBB, URLLC, OrderedClusterState

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_REPORT = []


@pytest.fixture
def report():
    """Collects one-line verdicts that are echoed in the terminal summary."""
    def add(line):
        print(line)
        _REPORT.append(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance verdicts")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture
def qos():
    return QosSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_cluster(rng, kinds, qos=None, rho=1000.0, budget=1.0, r_min=1.0, scale=3.0):
    """SIC-ordered cluster with exponential gains and the given member kinds."""
    qos = qos or QosSpec()
    g = np.sort(rng.exponential(size=len(kinds)) * scale)[::-1]
    members = [(i, kind, float(g[i]), qos.urllc_rate if kind == URLLC else r_min)
               for i, kind in enumerate(kinds)]
    return OrderedClusterState.build(0, members, rho, budget)


def fd_grad(f, x, rel=1e-6):
    """Central differences with a per-coordinate step."""
    x = np.asarray(x, float)
    out = np.empty_like(x)
    for i in range(x.size):
        h = rel * max(abs(x[i]), 1e-3)
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


__all__ = ["random_cluster", "fd_grad", "EMBB", "URLLC"]
