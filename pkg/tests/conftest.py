import re
import time

import pytest

_OUTCOMES = {}
_DETAILS = {}


class Criterion:
    """Collects the measured numbers of one acceptance criterion."""

    def __init__(self, number):
        self.number = number
        self.notes = []
        self.start = time.perf_counter()

    def note(self, text):
        self.notes.append(text)

    def elapsed(self):
        return time.perf_counter() - self.start


@pytest.fixture
def criterion(request):
    m = re.match(r"test_criterion_(\d+)", request.node.name)
    c = Criterion(int(m.group(1)) if m else 0)
    yield c
    _DETAILS[c.number] = (c.elapsed(), "; ".join(c.notes))


def pytest_runtest_logreport(report):
    m = re.search(r"::test_criterion_(\d+)", report.nodeid)
    if m and (report.when == "call" or report.outcome != "passed"):
        _OUTCOMES[int(m.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        word = {"passed": "PASS", "failed": "FAIL"}.get(_OUTCOMES[n], _OUTCOMES[n].upper())
        secs, notes = _DETAILS.get(n, (float("nan"), ""))
        terminalreporter.write_line(f"{word} criterion {n} ({secs:.2f} s) {notes}")
