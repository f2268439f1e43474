"""Shared test hooks.

The acceptance tests register one summary line per criterion here; the
terminal summary echoes them so the final report always shows one
pass/fail line for each criterion, whether or not output capture is on.
"""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
