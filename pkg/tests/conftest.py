import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("repo")


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def accept(request):
    """Record one acceptance line: ``accept(n, ok, detail)``."""
    lines = request.config._acceptance_lines

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
