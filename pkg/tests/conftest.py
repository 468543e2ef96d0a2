import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lohmm import fixtures  # noqa: E402
from lohmm.formats import parse_sequence  # noqa: E402

_criteria: dict = {}


@pytest.fixture(scope="session")
def load():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = fixtures.load(name)
        return cache[name]
    return get


@pytest.fixture
def seq():
    def make(m, text):
        return parse_sequence(text, m.alphabet)
    return make


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::test_criterion_")[1]
    num = int(name.split("_")[0])
    if report.when == "call" or report.outcome != "passed":
        prev = _criteria.get(num, "PASS")
        _criteria[num] = "PASS" if report.passed and prev == "PASS" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        terminalreporter.write_line(f"criterion {num:2d}: {_criteria[num]}")
