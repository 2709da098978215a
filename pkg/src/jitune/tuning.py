"""Per-key tuning state machine and registry.

A tuner walks the candidate array in order, one candidate per call (times
``replicates_per_candidate``), then asks for the winner to be rebuilt once
and from there on serves the winner. The phase only moves forward:

    Exploring(0) -> ... -> Exploring(k-1) -> Finalizing -> Tuned(best)

and goes back to ``Exploring(0)`` only through :meth:`TunerHandle.reset`.
"""

from __future__ import annotations

import statistics
import threading
from dataclasses import dataclass, field
from typing import Any, Hashable, Literal, Sequence, Union

from .errors import (
    Busy,
    DuplicateKey,
    EmptyCandidateSpace,
    InvalidCandidate,
    InvalidCandidateSpace,
    MetricMismatch,
    NoMeasurements,
    OutOfOrderCompletion,
    SpaceMismatch,
)
from .measurement import MetricSample


@dataclass(frozen=True)
class TuningKey:
    site_id: Hashable
    problem_label: str


@dataclass(frozen=True)
class CandidateSpace:
    """Either integer parameter values (``values``) or ``count`` implementations."""

    values: tuple[int, ...] | None = None
    count: int | None = None

    def __post_init__(self) -> None:
        if (self.values is None) == (self.count is None):
            raise InvalidCandidateSpace("give exactly one of values= or count=")
        if self.values is not None:
            values = tuple(self.values)
            if not values:
                raise EmptyCandidateSpace("parameter value list is empty")
            for v in values:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise InvalidCandidateSpace(f"parameter values must be integers, got {v!r}")
            if len(set(values)) != len(values):
                raise InvalidCandidateSpace(f"duplicate parameter values in {values}")
            object.__setattr__(self, "values", values)
        else:
            if isinstance(self.count, bool) or not isinstance(self.count, int):
                raise InvalidCandidateSpace(f"implementation count must be an integer, got {self.count!r}")
            if self.count < 1:
                raise EmptyCandidateSpace("implementation count must be >= 1")

    @classmethod
    def parameter_values(cls, values: Sequence[int]) -> CandidateSpace:
        return cls(values=tuple(values))

    @classmethod
    def implementations(cls, count: int) -> CandidateSpace:
        return cls(count=count)

    @property
    def kind(self) -> Literal["parameter_values", "implementation_indices"]:
        return "parameter_values" if self.values is not None else "implementation_indices"

    @property
    def k(self) -> int:
        return len(self.values) if self.values is not None else self.count  # type: ignore[return-value]

    def __len__(self) -> int:
        return self.k

    def check_index(self, index: int) -> None:
        if not 0 <= index < self.k:
            raise InvalidCandidate(f"candidate index {index} outside [0, {self.k})")

    def candidate(self, index: int) -> int:
        """Parameter value for ``index`` (or the index itself for implementations)."""
        self.check_index(index)
        return self.values[index] if self.values is not None else index


@dataclass(frozen=True)
class TunerConfig:
    replicates_per_candidate: int = 1
    aggregate: Literal["min", "mean"] = "min"
    block_when_busy: bool = True

    def __post_init__(self) -> None:
        if self.replicates_per_candidate < 1:
            raise ValueError("replicates_per_candidate must be >= 1")
        if self.aggregate not in ("min", "mean"):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")


# -- phases -----------------------------------------------------------------


@dataclass(frozen=True)
class Exploring:
    next_index: int
    name = "exploring"


@dataclass(frozen=True)
class Finalizing:
    name = "finalizing"


@dataclass(frozen=True)
class Tuned:
    best_index: int
    name = "tuned"


Phase = Union[Exploring, Finalizing, Tuned]


# -- actions ----------------------------------------------------------------


@dataclass(frozen=True)
class ExecuteCandidate:
    index: int
    must_compile: bool
    phase_name = "exploring"


@dataclass(frozen=True)
class CompileBestAndExecute:
    index: int
    must_compile = True
    phase_name = "finalizing"


@dataclass(frozen=True)
class ExecuteTuned:
    index: int
    must_compile = False
    phase_name = "tuned"


Action = Union[ExecuteCandidate, CompileBestAndExecute, ExecuteTuned]


def aggregate(samples: Sequence[MetricSample], how: str) -> float:
    values = [s.value for s in samples]
    return min(values) if how == "min" else statistics.fmean(values)


def argmin_index(scores: Sequence[float | None]) -> int:
    """Index of the smallest score; ties go to the lowest index; ``None`` is skipped."""
    best = None
    for i, s in enumerate(scores):
        if s is None:
            continue
        if best is None or s < scores[best]:  # strict: keeps the earliest on ties
            best = i
    if best is None:
        raise NoMeasurements("no candidate has been measured yet")
    return best


@dataclass
class TuningState:
    k: int
    phase: Phase = field(default_factory=lambda: Exploring(0))
    records: list[list[MetricSample]] = field(default_factory=list)
    tuned_samples: list[MetricSample] = field(default_factory=list)
    call_count: int = 0
    compile_count: int = 0
    metric_id: str | None = None

    def __post_init__(self) -> None:
        if not self.records:
            self.records = [[] for _ in range(self.k)]

    def scores(self, how: str) -> list[float | None]:
        return [aggregate(r, how) if r else None for r in self.records]


class TunerHandle:
    """One autotuning problem: its key, candidate space and state."""

    def __init__(self, key: TuningKey, space: CandidateSpace, config: TunerConfig | None = None) -> None:
        self.key = key
        self.space = space
        self.config = config or TunerConfig()
        self.state = TuningState(space.k)
        self._pending: Action | None = None
        self._mutex = threading.RLock()
        self._slot = threading.Lock()
        # Exploration variant kept across replicates; owned by the dispatcher.
        self.scratch: Any = None

    def __repr__(self) -> str:
        return f"TunerHandle({self.key!r}, phase={self.phase!r}, calls={self.state.call_count})"

    @property
    def phase(self) -> Phase:
        return self.state.phase

    @property
    def pending(self) -> Action | None:
        return self._pending

    def _acquire_slot(self) -> None:
        if self.config.block_when_busy:
            self._slot.acquire()
        elif not self._slot.acquire(blocking=False):
            raise Busy(f"a call on {self.key} is already in flight")

    def _release_slot(self) -> None:
        if self._slot.locked():
            self._slot.release()

    def _next_action(self) -> Action:
        st = self.state
        phase = st.phase
        if isinstance(phase, Exploring):
            i = phase.next_index
            return ExecuteCandidate(i, must_compile=not st.records[i])
        if isinstance(phase, Finalizing):
            return CompileBestAndExecute(argmin_index(st.scores(self.config.aggregate)))
        return ExecuteTuned(phase.best_index)

    def begin_call(self) -> Action:
        """Decide what this call runs. Holds the key until complete/abort."""
        self._acquire_slot()
        with self._mutex:
            action = self._next_action()
            self._pending = action
            return action

    def complete_call(self, action: Action, sample: MetricSample) -> Phase:
        """Record ``sample`` for ``action`` and advance the phase."""
        with self._mutex:
            if self._pending is None or action != self._pending:
                raise OutOfOrderCompletion(f"completion for {action!r} but pending is {self._pending!r}")
            st = self.state
            if st.metric_id is None:
                st.metric_id = sample.metric_id
            elif sample.metric_id != st.metric_id:
                raise MetricMismatch(f"sample metric {sample.metric_id!r} != {st.metric_id!r}")

            if isinstance(action, ExecuteCandidate):
                rec = st.records[action.index]
                rec.append(sample)
                if len(rec) >= self.config.replicates_per_candidate:
                    nxt = action.index + 1
                    st.phase = Exploring(nxt) if nxt < st.k else Finalizing()
            elif isinstance(action, CompileBestAndExecute):
                st.tuned_samples.append(sample)
                st.phase = Tuned(action.index)
            else:
                st.tuned_samples.append(sample)

            if action.must_compile:
                st.compile_count += 1
            st.call_count += 1
            self._pending = None
            self._release_slot()
            return st.phase

    def abort_call(self) -> None:
        """Drop the pending action; the state stays as it was before begin_call."""
        with self._mutex:
            self._pending = None
            self._release_slot()

    def best_candidate(self) -> tuple[int, bool]:
        """(parameter value or implementation index, is_final)."""
        with self._mutex:
            phase = self.state.phase
            if isinstance(phase, Tuned):
                return self.space.candidate(phase.best_index), True
            idx = argmin_index(self.state.scores(self.config.aggregate))
            return self.space.candidate(idx), False

    def best_index(self) -> tuple[int, bool]:
        with self._mutex:
            phase = self.state.phase
            if isinstance(phase, Tuned):
                return phase.best_index, True
            return argmin_index(self.state.scores(self.config.aggregate)), False

    def reset(self) -> Phase:
        with self._mutex:
            self.state = TuningState(self.space.k)
            self.scratch = None
            if self._pending is not None:
                self._pending = None
                self._release_slot()
            return self.state.phase


class TuningRegistry:
    """Map from :class:`TuningKey` to its tuner. Safe for concurrent callers."""

    def __init__(self, default_config: TunerConfig | None = None) -> None:
        self.default_config = default_config or TunerConfig()
        self._tuners: dict[TuningKey, TunerHandle] = {}
        self._lock = threading.Lock()

    def __contains__(self, key: TuningKey) -> bool:
        return key in self._tuners

    def __len__(self) -> int:
        return len(self._tuners)

    def get(self, key: TuningKey) -> TunerHandle | None:
        return self._tuners.get(key)

    def create_tuner(self, key: TuningKey, space: CandidateSpace, config: TunerConfig | None = None) -> TunerHandle:
        with self._lock:
            if key in self._tuners:
                raise DuplicateKey(key)
            handle = TunerHandle(key, space, config or self.default_config)
            self._tuners[key] = handle
            return handle

    def lookup_or_create(
        self,
        site_id: Hashable,
        problem_label: str,
        space: CandidateSpace,
        config: TunerConfig | None = None,
    ) -> TunerHandle:
        key = TuningKey(site_id, problem_label)
        with self._lock:
            handle = self._tuners.get(key)
            if handle is not None:
                if handle.space != space:
                    raise SpaceMismatch(f"{key} registered with {handle.space}, got {space}")
                return handle
            handle = TunerHandle(key, space, config or self.default_config)
            self._tuners[key] = handle
            return handle

    def keys(self) -> list[TuningKey]:
        with self._lock:
            return list(self._tuners)


def create_tuner(registry: TuningRegistry, key: TuningKey, space: CandidateSpace, config: TunerConfig | None = None) -> TunerHandle:
    return registry.create_tuner(key, space, config)
