"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each."""

import pytest

from ambit_kit import acceptance


@pytest.mark.parametrize("criterion", acceptance.CRITERIA,
                         ids=[f"criterion_{i + 1}" for i in range(len(acceptance.CRITERIA))])
def test_criterion(criterion, capsys):
    res = criterion()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
