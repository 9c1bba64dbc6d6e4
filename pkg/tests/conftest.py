import pytest

_VERDICTS: dict[int, tuple[bool, str, str]] = {}


class Verdict:
    """Records one acceptance criterion's outcome for the end-of-run summary."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def check(self, passed: bool, detail: str) -> None:
        _VERDICTS[self.number] = (bool(passed), self.title, detail)
        line = f"criterion {self.number} {'PASS' if passed else 'FAIL'}: {self.title} ({detail})"
        print(line)
        assert passed, line


@pytest.fixture
def verdict():
    return Verdict


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        passed, title, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
