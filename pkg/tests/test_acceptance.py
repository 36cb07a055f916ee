"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a PASS/FAIL line with the measured quantity; see the
README for the two criteria that are expected to fail.
"""

import pytest

from eikonal_entropy.checks import REGISTRY


@pytest.mark.parametrize("name", list(REGISTRY))
def test_criterion(name, capsys):
    res = REGISTRY[name].run(seed=0)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, res.summary
