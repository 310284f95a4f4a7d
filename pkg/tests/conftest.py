import pytest

# acceptance lines recorded by tests/test_acceptance.py, printed after the run
ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record():
    def _record(key: str, ok: bool, detail: str):
        ACCEPTANCE[key] = f"{key} {'PASS' if ok else 'FAIL'}: {detail}"
        print(ACCEPTANCE[key])
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        terminalreporter.write_line(ACCEPTANCE[key])
