"""Acceptance criteria, run once per session; one PASS/FAIL line per criterion is printed in the summary."""

import pytest

import conftest
from blochpt.verify import run_all

CRITERIA = list(range(1, 14))


@pytest.fixture(scope="module")
def results():
    return {r.number: r for r in run_all()}


@pytest.mark.slow
@pytest.mark.parametrize("number", CRITERIA)
def test_criterion(results, number):
    r = results[number]
    line = f"{r.line()}  ({r.seconds:.1f}s)"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert r.passed, f"{r.line()}\nmetrics: {r.metrics}"
