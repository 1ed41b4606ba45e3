import numpy as np
import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store one acceptance line; printed again in the terminal summary."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        _CRITERIA[number] = (name, bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} criterion {number} {name}: {detail}")
        return bool(passed)

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}: {detail}")
