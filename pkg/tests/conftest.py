import pytest

_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(capsys):
    """``criterion(label, ok, detail)`` records a pass/fail line and asserts ``ok``."""

    def check(label: str, ok: bool, detail: str) -> None:
        line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
        _RESULTS.append((label, ok, detail))
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_RESULTS, key=lambda r: int(r[0].split()[1])):
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'} ({detail})")
