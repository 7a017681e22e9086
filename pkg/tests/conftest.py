import pytest

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    def report(number, title, ok, detail):
        ACCEPTANCE_LINES.append((number, f"criterion {number} {title}: "
                                         f"{'PASS' if ok else 'FAIL'} ({detail})"))
        print(ACCEPTANCE_LINES[-1][1])
        assert ok, detail
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
