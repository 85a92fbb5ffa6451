"""Acceptance suite: one printed PASS/FAIL line per numbered criterion."""
import pytest

from entropic_dynamics.acceptance import CRITERIA, format_result, run_acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, record_property):
    (result,) = run_acceptance([number])
    line = format_result(result)
    print(line)
    record_property("acceptance", line)
    assert result.number == number
    assert result.passed, line
