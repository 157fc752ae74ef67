import pytest

# criterion number -> (passed, one-line summary); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def put(n, ok, summary):
        ACCEPTANCE[n] = (bool(ok), summary)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {summary}")
    return put


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, summary = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {summary}")
