from __future__ import annotations

from hypothesis import settings

settings.register_profile("weylpair", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("weylpair")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
