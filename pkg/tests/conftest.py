import functools

import numpy as np
import pytest

from syl.radial import AnnulusProblem, solve_annulus

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def annulus(n, k, a=1.0, b=4.0):
    return solve_annulus(AnnulusProblem(a, b, n, k))


@pytest.fixture(scope="session")
def solve():
    return annulus


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
