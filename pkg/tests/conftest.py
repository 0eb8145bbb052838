"""Shared pytest plumbing.

The acceptance tests register one human-readable pass/fail line per
criterion; echoing them from a terminal-summary hook keeps them visible
in the report even though pytest captures stdout of passing tests.
"""

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
