import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "fsvar",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fsvar")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mise(a, b, grid):
    return float(np.trapezoid((np.asarray(a) - np.asarray(b)) ** 2, grid))


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL summary, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        _VERDICTS.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        print(_VERDICTS[-1])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
