import math

import numpy as np
import pytest

from switchlin.model import ContinuousSignal, SwitchedSystem


def taylor_exp(A, t=1.0, terms=30):
    """Truncated power series for exp(tA); the oracle for small ||tA||."""
    A = np.asarray(A, dtype=float) * t
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


@pytest.fixture
def scalar_pair():
    system = SwitchedSystem(([[-1.0]], [[0.5]]), "continuous")
    signal = ContinuousSignal(tail=((1, 2.0), (2, 1.0)))
    return system, signal


@pytest.fixture
def classic_pair():
    A1 = [[-0.1, 1.0], [-10.0, -0.1]]
    A2 = [[-0.1, 10.0], [-1.0, -0.1]]
    return SwitchedSystem((A1, A2), "continuous")


E_HALF = math.exp(-0.5)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
