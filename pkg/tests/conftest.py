"""Shared pytest configuration.

The acceptance-check module registers one line per criterion in
``ACCEPTANCE_LINES``; the terminal-summary hook below prints them so that a
plain ``pytest -v`` run ends with one PASS/FAIL line per criterion.
"""

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
