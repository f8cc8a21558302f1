"""Collects acceptance verdicts and prints them once at the end of the run."""

VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":").rstrip("ab"))):
        terminalreporter.write_line(line)
