import numpy as np
import pytest

from pucopula import compute_ranks
from pucopula.datasets import CASE_STUDY

# reference rank vectors of the case-study table
CASE_R1 = [4, 20, 8, 19, 13, 17, 18, 11, 3, 15, 5, 10, 9, 16, 14, 6, 1, 12, 7, 2]
CASE_R2 = [9, 20, 4, 19, 8, 15, 18, 10, 12, 16, 6, 17, 7, 13, 11, 5, 1, 14, 3, 2]


@pytest.fixture(scope="session")
def case_ranks():
    return compute_ranks(CASE_STUDY)


@pytest.fixture
def rng():
    return np.random.default_rng(20170316)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acceptance_log.RESULTS):
        ok, text = acceptance_log.RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {text}")
