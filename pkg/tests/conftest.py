import pytest

from widthplan.domains import DomainSpec, generate

_VERDICTS = {}


def make(name, **params):
    return generate(DomainSpec(name, params))


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, ok, detail=""):
        _VERDICTS[number] = (ok, detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS, key=lambda n: (int("".join(c for c in str(n) if c.isdigit())), str(n))):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
