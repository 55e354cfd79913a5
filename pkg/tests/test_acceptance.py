"""Acceptance criteria, each run at its stated tolerance.

Every criterion prints one ``[PASS]`` / ``[FAIL]`` line as it finishes; the
lines are repeated together in the terminal summary. The Monte Carlo runs are
shared through the session ``suite_context`` so criteria 6, 11 and 12 reuse
the same paths.
"""

import pytest

from fbmlab.acceptance import CRITERIA, run_criterion

SLOW = {7, 11, 12}


@pytest.mark.parametrize("number", [
    pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n for n in sorted(CRITERIA)
])
def test_criterion(number, suite_context, acceptance_lines, capsys):
    result = run_criterion(number, suite_context)
    line = result.line()
    acceptance_lines.append(line)
    with capsys.disabled():
        print("\n" + line)
    assert result.passed, line
