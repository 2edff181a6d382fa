import numpy as np
import pytest

from lcqp.problem import LcqpProblem


def make_corners(**kw):
    return LcqpProblem(Q=2 * np.eye(2), g=np.array([-2.0, -2.0]),
                       L=np.array([[1.0, 0.0]]), R=np.array([[0.0, 1.0]]), **kw)


@pytest.fixture
def corners():
    return make_corners()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[number])
