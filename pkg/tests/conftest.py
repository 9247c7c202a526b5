from contextlib import contextmanager

import pytest

_verdicts: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary."""

    @contextmanager
    def record(number: int, title: str):
        try:
            yield
        except BaseException:
            _verdicts[number] = (title, False)
            print(f"criterion {number:2d}: FAIL  {title}")
            raise
        _verdicts[number] = (title, True)
        print(f"criterion {number:2d}: PASS  {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        title, ok = _verdicts[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
