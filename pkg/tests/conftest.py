import pytest

from vacuumqkd.correlations import QuadratureSpec

# Looser tolerance keeps the exact-integral tests quick.
FAST_SPEC = QuadratureSpec(rel_tol=1e-6)


@pytest.fixture
def fast_spec():
    return FAST_SPEC


# Acceptance results registered by tests/test_acceptance.py, printed once per run.
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
