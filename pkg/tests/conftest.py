import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def report(request):
    """Record one 'CRITERION k: PASS/FAIL ...' line for the terminal summary."""
    lines = request.config.__dict__.setdefault("acceptance_lines", [])

    def emit(k, ok, detail):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        lines.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.__dict__.get("acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
