"""Collects the acceptance suite's per-criterion verdict lines and prints
them in the terminal summary, where pytest's output capture cannot swallow
them."""

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
