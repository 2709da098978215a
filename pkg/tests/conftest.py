from __future__ import annotations

import pytest

from jitune import TuningKey, TuningRegistry, VirtualClock
from jitune.kernels import warm_up


class CountingFactory:
    """Wraps a factory and records every build as (index, calls_completed_before)."""

    def __init__(self, inner):
        self.inner = inner
        self.builds: list[int] = []

    def build(self, space, index):
        self.builds.append(index)
        return self.inner.build(space, index)


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    warm_up()


@pytest.fixture
def registry():
    return TuningRegistry()


@pytest.fixture
def clock():
    return VirtualClock()


@pytest.fixture
def key_a():
    return TuningKey("site1", "block_size")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
