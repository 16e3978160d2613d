"""One line per acceptance criterion; run with ``pytest -s`` to see them inline."""

import pytest

from uml.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [n for n, *_ in CRITERIA])
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
    assert result.in_budget, f"{result.seconds:.2f}s over the {result.budget}s budget"
