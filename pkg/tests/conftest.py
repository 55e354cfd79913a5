import pytest
from hypothesis import settings

from fbmlab.acceptance import SuiteContext

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def suite_context():
    """Shared Monte Carlo runs, computed at most once per session."""
    return SuiteContext()


@pytest.fixture(scope="session")
def canonical_report(suite_context):
    """d=2, H=0.4, eps=0.1, n=512, 10^4 paths, g in {0, 1, 5, 25}."""
    return suite_context.canonical()


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_lines():
    """Collected criterion lines, repeated in the terminal summary."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
