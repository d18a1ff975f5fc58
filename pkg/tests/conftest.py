import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion id")


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for the criterion marked on the test."""
    mark = request.node.get_closest_marker("criterion")
    cid, title = mark.args
    seen = []

    def report(ok, detail=""):
        seen.append(ok)
        _LINES.append(f"{cid} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        return ok

    yield report
    if not seen:
        _LINES.append(f"{cid} FAIL  {title}  (did not complete)")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
