import numpy as np
import pytest

from jointvlmc.evaluation import load_config
from jointvlmc.vlmc import ProbabilisticContextTree


def ctx(text):
    """'12' -> (0, 1) for the binary alphabet {1, 2}, oldest symbol first."""
    return tuple(int(c) - 1 for c in text)


def brute_counts(data, s, k):
    """N(s, a) straight from the definition."""
    data = list(data)
    out = np.zeros(k, dtype=np.int64)
    d = len(s)
    for i in range(d, len(data)):
        if tuple(data[i - d:i]) == tuple(s):
            out[data[i]] += 1
    return out


@pytest.fixture(scope="session")
def favorable():
    return load_config("favorable")


@pytest.fixture(scope="session")
def unfavorable():
    return load_config("unfavorable")


@pytest.fixture
def model_x_fav():
    return ProbabilisticContextTree(2, {ctx("1"): [1 / 3, 2 / 3], ctx("12"): [1 / 3, 2 / 3],
                                        ctx("22"): [2 / 3, 1 / 3]})


# acceptance verdicts, printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {line}")
