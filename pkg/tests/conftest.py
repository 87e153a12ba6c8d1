import pytest

from perspectives.kb import load_kb
from perspectives.units import load_surface_table

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table():
    return load_surface_table()


@pytest.fixture(scope="session")
def mini_kb(table):
    return load_kb(None, table)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
