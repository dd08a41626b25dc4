import pytest

_acceptance_lines = {}


@pytest.fixture
def acceptance_record():
    def record(num, passed, detail):
        word = "PASS" if passed else "FAIL"
        _acceptance_lines[num] = f"criterion {num:2d}: {word} — {detail}"
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for num in sorted(_acceptance_lines):
            terminalreporter.write_line(_acceptance_lines[num])
