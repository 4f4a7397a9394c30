"""Shared pytest plumbing.

The acceptance tests append one verdict line each to ``ACCEPTANCE_LINES``;
replaying them in the terminal summary keeps the pass/fail overview visible
even though pytest captures per-test stdout.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.line(line)
