import pytest

_ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Record an acceptance verdict; the terminal summary prints one line per criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
