import pytest

from wiredyn import PhysicalContext

_REPORT = []


@pytest.fixture
def ctx():
    return PhysicalContext()


@pytest.fixture(scope="session")
def report():
    """Collects one verdict line per acceptance check, printed at the end of the run."""
    def add(number, name, ok, detail=""):
        _REPORT.append((number, name, bool(ok), detail))
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_REPORT, key=lambda r: r[0]):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {name}: {detail}")
