"""Shared test plumbing: the acceptance checklist printed after the run."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checklist")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
