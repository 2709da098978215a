"""Tick counting and pluggable metric sources.

Ticks are nanoseconds from the highest-resolution monotonic counter Python
exposes (``time.perf_counter_ns``). All comparisons happen in ticks; nothing in
the core converts to seconds.
"""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Protocol, runtime_checkable

TICKS_PER_SECOND = 1_000_000_000
DEFAULT_METRIC = "ticks"

Clock = Callable[[], int]


def read_ticks() -> int:
    """Monotonic high-resolution tick count (ns)."""
    return time.perf_counter_ns()


def read_cpu_ticks() -> int:
    """CPU time consumed by the calling thread (ns).

    Unlike :func:`read_ticks` this does not advance while the thread is
    descheduled, so CPU-bound work measured with it is immune to preemption
    and cgroup throttling. It does not count time spent blocked or in other
    threads.
    """
    return time.thread_time_ns()


CLOCKS: dict[str, Callable[[], int]] = {"ticks": read_ticks, "cpu_ticks": read_cpu_ticks}


class VirtualClock:
    """Deterministic clock that only moves when told to.

    Synthetic executors and simulated compilers advance it instead of
    spinning, which gives zero-noise measurements.
    """

    def __init__(self, start: int = 0) -> None:
        self._now = int(start)
        self._lock = threading.Lock()

    def __call__(self) -> int:
        return self._now

    def advance(self, ticks: int) -> None:
        if ticks < 0:
            raise ValueError("cannot move a clock backwards")
        with self._lock:
            self._now += int(ticks)


def spend(ticks: int, clock: Clock = read_ticks) -> None:
    """Consume ``ticks`` on ``clock``: advance a virtual clock, spin on a real one."""
    if ticks <= 0:
        return
    advance = getattr(clock, "advance", None)
    if advance is not None:
        advance(ticks)
        return
    deadline = clock() + ticks
    while clock() < deadline:
        pass


@dataclass(frozen=True)
class MetricSample:
    value: float
    metric_id: str = DEFAULT_METRIC

    def __post_init__(self) -> None:
        if not self.value >= 0:
            raise ValueError(f"metric sample must be non-negative, got {self.value!r}")


@runtime_checkable
class MetricSource(Protocol):
    """Brackets an execution and scores it. Lower values are better."""

    metric_id: str

    def start(self) -> Any: ...

    def stop(self, token: Any) -> MetricSample: ...


class TickSource:
    """Elapsed ticks on ``clock``."""

    def __init__(self, clock: Clock = read_ticks, metric_id: str = DEFAULT_METRIC) -> None:
        self.clock = clock
        self.metric_id = metric_id

    def start(self) -> int:
        return self.clock()

    def stop(self, token: int) -> MetricSample:
        return MetricSample(self.clock() - token, self.metric_id)


class TransformedSource:
    """Applies ``fn`` to every sample of ``inner``.

    Used to check that strictly increasing rescalings of the metric leave the
    selection unchanged.
    """

    def __init__(self, inner: MetricSource, fn: Callable[[float], float], metric_id: str | None = None) -> None:
        self.inner = inner
        self.fn = fn
        self.metric_id = metric_id or f"{inner.metric_id}:transformed"

    def start(self) -> Any:
        return self.inner.start()

    def stop(self, token: Any) -> MetricSample:
        return MetricSample(self.fn(self.inner.stop(token).value), self.metric_id)


def timed_call(exec: Callable[[Any], Any], payload: Any, source: MetricSource | None = None) -> tuple[Any, MetricSample]:
    """Run ``exec(payload)`` bracketed by ``source``; return output and sample.

    Failures propagate and produce no sample.
    """
    source = source if source is not None else TickSource()
    token = source.start()
    out = exec(payload)
    sample = source.stop(token)
    return out, sample


def measure(exec: Callable[[Any], Any], payload: Any, source: MetricSource | None = None) -> MetricSample:
    return timed_call(exec, payload, source)[1]


def _noop(_payload: Any) -> None:
    return None


def calibrate_overhead(source: MetricSource | None = None, trials: int = 1000, quantile: float = 0.99) -> float:
    """Baseline overhead of ``measure`` around a no-op, as a high quantile.

    A single no-op measurement should fall below this value except under
    preemption; ``quantile`` trades tightness for robustness.
    """
    source = source if source is not None else TickSource()
    values = sorted(measure(_noop, None, source).value for _ in range(trials))
    if len(values) == 1:
        return values[0]
    cuts = statistics.quantiles(values, n=1000, method="inclusive")
    idx = min(len(cuts) - 1, max(0, int(round(quantile * 1000)) - 1))
    return cuts[idx]
