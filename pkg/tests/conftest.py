import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


import pytest


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    log = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(num, ok, detail):
        line = f"CRITERION {num}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        log.append((num, line))
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
