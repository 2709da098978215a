"""Variant construction, the instantiation cache, and the per-call dispatcher.

A :class:`VariantFactory` turns ``(space, index)`` into an executable taking a
single opaque payload. Exploration variants live for one candidate only; the
winner is rebuilt once more and that rebuild is what goes into the cache.
"""

from __future__ import annotations

import functools
import threading
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Protocol, Sequence, runtime_checkable

from .errors import CacheMiss, DoubleFinalize, FactoryFailure
from .measurement import Clock, MetricSource, TickSource, read_ticks, spend, timed_call
from .tuning import (
    CandidateSpace,
    CompileBestAndExecute,
    ExecuteCandidate,
    ExecuteTuned,
    TunerConfig,
    TuningKey,
    TuningRegistry,
)

Executable = Callable[[Any], Any]


@dataclass(frozen=True)
class CompiledVariant:
    exec: Executable
    compile_cost: int
    candidate_index: int

    def __call__(self, payload: Any) -> Any:
        return self.exec(payload)


@runtime_checkable
class VariantFactory(Protocol):
    """Extension point for variant backends.

    ``build(space, index)`` returns an executable ``f(payload)``. It must be
    deterministic: building the same ``(space, index)`` twice yields
    functionally identical executables. Whatever work ``build`` does is
    charged as compile cost, so expensive setup belongs there and not in the
    executable.
    """

    def build(self, space: CandidateSpace, index: int) -> Executable: ...


def build_variant(factory: VariantFactory, space: CandidateSpace, index: int, clock: Clock = read_ticks) -> CompiledVariant:
    space.check_index(index)
    t0 = clock()
    try:
        exe = factory.build(space, index)
    except Exception as exc:
        raise FactoryFailure(f"{type(factory).__name__} failed to build candidate {index}: {exc}") from exc
    cost = clock() - t0
    return CompiledVariant(exe, max(0, cost), index)


# -- factories --------------------------------------------------------------


class ClosureFactory:
    """Specializes ``kernel(candidate, payload)`` by binding the candidate.

    For parameter spaces the candidate is the parameter value; for
    implementation spaces it is the index.
    """

    def __init__(self, kernel: Callable[[int, Any], Any]) -> None:
        self.kernel = kernel

    @classmethod
    def from_implementations(cls, functions: Sequence[Callable[[Any], Any]]) -> ClosureFactory:
        funcs = tuple(functions)

        def choose(index: int, payload: Any) -> Any:
            return funcs[index](payload)

        return cls(choose)

    def build(self, space: CandidateSpace, index: int) -> Executable:
        return functools.partial(self.kernel, space.candidate(index))


class SimulatedFactory:
    """Wraps another factory and charges a fixed extra build latency."""

    def __init__(self, inner: VariantFactory, latency_ticks: int, clock: Clock = read_ticks) -> None:
        if latency_ticks < 0:
            raise ValueError("latency must be non-negative")
        self.inner = inner
        self.latency_ticks = int(latency_ticks)
        self.clock = clock

    def build(self, space: CandidateSpace, index: int) -> Executable:
        spend(self.latency_ticks, self.clock)
        return self.inner.build(space, index)


class SyntheticFactory:
    """Executors that spend ``costs[index]`` ticks and return their index.

    With a :class:`~jitune.measurement.VirtualClock` the costs are exact
    (zero noise); with the real clock they are busy-waits.
    """

    def __init__(self, costs: Sequence[int], latency_ticks: int = 0, clock: Clock = read_ticks) -> None:
        self.costs = tuple(int(c) for c in costs)
        self.latency_ticks = int(latency_ticks)
        self.clock = clock

    def build(self, space: CandidateSpace, index: int) -> Executable:
        if space.k != len(self.costs):
            raise ValueError(f"space has {space.k} candidates but {len(self.costs)} costs were given")
        spend(self.latency_ticks, self.clock)
        cost, clock = self.costs[index], self.clock

        def run(_payload: Any) -> int:
            spend(cost, clock)
            return index

        return run


# -- instantiation cache ----------------------------------------------------


class InstantiationCache:
    """Finalized winners only, one per tuning key."""

    def __init__(self) -> None:
        self._entries: dict[TuningKey, CompiledVariant] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: TuningKey) -> bool:
        return key in self._entries

    def get(self, key: TuningKey) -> CompiledVariant | None:
        return self._entries.get(key)

    def put(self, key: TuningKey, variant: CompiledVariant) -> None:
        with self._lock:
            if key in self._entries:
                raise DoubleFinalize(f"{key} already has a finalized variant")
            self._entries[key] = variant

    def evict(self, key: TuningKey) -> None:
        with self._lock:
            self._entries.pop(key, None)


def cache_get(cache: InstantiationCache, key: TuningKey) -> CompiledVariant | None:
    return cache.get(key)


def cache_put(cache: InstantiationCache, key: TuningKey, variant: CompiledVariant) -> None:
    cache.put(key, variant)


# -- dispatcher -------------------------------------------------------------


@dataclass(frozen=True)
class IterationReport:
    call_index: int
    phase: str
    candidate: int
    compiled: bool
    compile_ticks: int
    exec_ticks: float


def autotuned_invoke(
    registry: TuningRegistry,
    cache: InstantiationCache,
    factory: VariantFactory,
    site_id: Hashable,
    label: str,
    space: CandidateSpace,
    payload: Any,
    *,
    config: TunerConfig | None = None,
    source: MetricSource | None = None,
    clock: Clock = read_ticks,
) -> tuple[Any, IterationReport]:
    """Run one call of an autotuned function.

    lookup -> begin_call -> build if needed -> measured execution ->
    (cache the winner) -> complete_call. If building or running raises, the
    call is aborted and the tuner stays where it was.
    """
    source = source if source is not None else TickSource(clock)
    handle = registry.lookup_or_create(site_id, label, space, config)
    key = handle.key
    action = handle.begin_call()
    try:
        compile_ticks = 0
        if isinstance(action, ExecuteCandidate):
            if action.index == 0 and action.must_compile:
                # start of a tuning cycle: anything cached belongs to a previous cycle
                cache.evict(key)
            if action.must_compile or handle.scratch is None:
                variant = build_variant(factory, space, action.index, clock)
                compile_ticks = variant.compile_cost
                handle.scratch = variant
            else:
                variant = handle.scratch
        elif isinstance(action, CompileBestAndExecute):
            variant = build_variant(factory, space, action.index, clock)
            compile_ticks = variant.compile_cost
        else:
            variant = cache.get(key)
            if variant is None:
                raise CacheMiss(f"{key} is tuned but has no cached variant")
        out, sample = timed_call(variant.exec, payload, source)
        if isinstance(action, CompileBestAndExecute):
            cache.put(key, variant)
    except BaseException:
        handle.abort_call()
        raise
    call_index = handle.state.call_count + 1
    if isinstance(action, CompileBestAndExecute):
        handle.scratch = None
    handle.complete_call(action, sample)
    report = IterationReport(
        call_index=call_index,
        phase=action.phase_name,
        candidate=action.index,
        compiled=action.must_compile,
        compile_ticks=compile_ticks,
        exec_ticks=sample.value,
    )
    return out, report


class TunedFunction:
    """Callable front end: ``f(payload)`` autotunes across calls.

    >>> from jitune import CandidateSpace, ClosureFactory, TunedFunction
    >>> f = TunedFunction(ClosureFactory(lambda b, x: x * b), CandidateSpace.parameter_values([2, 4, 8]))
    >>> [f(1) for _ in range(5)][:3]
    [2, 4, 8]
    """

    def __init__(
        self,
        factory: VariantFactory,
        space: CandidateSpace,
        *,
        label: str = "param",
        site_id: Hashable | None = None,
        config: TunerConfig | None = None,
        registry: TuningRegistry | None = None,
        cache: InstantiationCache | None = None,
        source: MetricSource | None = None,
        clock: Clock = read_ticks,
    ) -> None:
        self.factory = factory
        self.space = space
        self.label = label
        self.site_id = site_id if site_id is not None else id(self)
        self.config = config
        self.registry = registry if registry is not None else TuningRegistry()
        self.cache = cache if cache is not None else InstantiationCache()
        self.source = source
        self.clock = clock
        self.reports: list[IterationReport] = []

    @property
    def handle(self):
        return self.registry.lookup_or_create(self.site_id, self.label, self.space, self.config)

    def __call__(self, payload: Any) -> Any:
        out, report = autotuned_invoke(
            self.registry,
            self.cache,
            self.factory,
            self.site_id,
            self.label,
            self.space,
            payload,
            config=self.config,
            source=self.source,
            clock=self.clock,
        )
        self.reports.append(report)
        return out

    def best_candidate(self) -> tuple[int, bool]:
        return self.handle.best_candidate()

    def reset(self) -> None:
        self.handle.reset()
        self.cache.evict(self.handle.key)
