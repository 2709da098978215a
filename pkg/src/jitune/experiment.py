"""Experiment driver: repeated autotuned runs, fixed-candidate baselines, logs."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .measurement import Clock, MetricSource, TickSource, read_ticks, timed_call
from .tuning import CandidateSpace, TunerConfig, TuningRegistry
from .variants import (
    InstantiationCache,
    IterationReport,
    SimulatedFactory,
    SyntheticFactory,
    VariantFactory,
    autotuned_invoke,
    build_variant,
)

log = logging.getLogger(__name__)

KERNELS = ("matmul_order", "matmul_block", "saxpy_demo", "synthetic")
LOG_COLUMNS = ("run_id", "call_index", "phase", "candidate", "compile_ticks", "exec_ticks", "cumulative_ticks")
_LABELS = {
    "matmul_order": "implementation",
    "matmul_block": "block_size",
    "saxpy_demo": "chunk",
    "synthetic": "implementation",
}


@dataclass
class ExperimentConfig:
    kernel: str = "matmul_order"
    n: int = 128
    iterations: int = 100
    runs: int = 1
    candidates: CandidateSpace | None = None
    factory: str = "closure"
    seed: int = 0
    replicates: int = 1
    synthetic_costs: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}; choose from {KERNELS}")
        if self.n < 1 or self.iterations < 0 or self.runs < 1 or self.replicates < 1:
            raise ValueError("n, runs, replicates must be >= 1 and iterations >= 0")
        if self.kernel == "synthetic" and not self.synthetic_costs:
            raise ValueError("synthetic kernel needs synthetic_costs")
        parse_factory(self.factory)

    @property
    def space(self) -> CandidateSpace:
        if self.candidates is not None:
            return self.candidates
        if self.kernel == "matmul_order":
            return CandidateSpace.implementations(len(kernels.MATMUL_ORDERS))
        if self.kernel == "matmul_block":
            return CandidateSpace.parameter_values(kernels.DEFAULT_BLOCK_SIZES)
        if self.kernel == "saxpy_demo":
            return CandidateSpace.parameter_values(kernels.DEFAULT_SAXPY_CHUNKS)
        return CandidateSpace.implementations(len(self.synthetic_costs))

    @property
    def label(self) -> str:
        return _LABELS[self.kernel]

    @property
    def tuning_complete(self) -> bool:
        return self.iterations >= self.space.k * self.replicates + 1


def parse_factory(spec: str) -> tuple[str, int]:
    """``closure`` | ``jit`` | ``simulated:<ticks>`` -> (kind, latency)."""
    kind, _, arg = spec.partition(":")
    if kind in ("closure", "jit") and not arg:
        return kind, 0
    if kind == "simulated":
        try:
            latency = int(arg)
        except ValueError:
            raise ValueError(f"bad simulated latency in {spec!r}") from None
        if latency < 0:
            raise ValueError("simulated latency must be >= 0")
        return kind, latency
    raise ValueError(f"unknown factory {spec!r}; use closure, jit or simulated:<ticks>")


def make_factory(config: ExperimentConfig, clock: Clock = read_ticks) -> VariantFactory:
    kind, latency = parse_factory(config.factory)
    fresh = kind == "jit"
    if config.kernel == "synthetic":
        return SyntheticFactory(config.synthetic_costs, latency_ticks=latency, clock=clock)
    if config.kernel == "matmul_order":
        base: VariantFactory = kernels.MatmulOrderFactory(fresh=fresh)
    elif config.kernel == "matmul_block":
        base = kernels.BlockedMatmulFactory(fresh=fresh)
    else:
        base = kernels.SaxpyFactory(fresh=fresh)
    return SimulatedFactory(base, latency, clock) if kind == "simulated" else base


def make_payload(config: ExperimentConfig) -> Any:
    rng = np.random.default_rng(config.seed)
    if config.kernel in ("matmul_order", "matmul_block"):
        return (kernels.random_matrix(config.n, rng), kernels.random_matrix(config.n, rng))
    if config.kernel == "saxpy_demo":
        return (float(rng.uniform(-1, 1)), rng.standard_normal(config.n), rng.standard_normal(config.n))
    return None


# -- iteration log ----------------------------------------------------------


@dataclass(frozen=True)
class IterationRow:
    run_id: int
    call_index: int
    phase: str
    candidate: int
    compile_ticks: int
    exec_ticks: int
    cumulative_ticks: int


@dataclass
class IterationLog:
    rows: list[IterationRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def append(self, run_id: int, report: IterationReport) -> IterationRow:
        prev = self.rows[-1].cumulative_ticks if self.rows and self.rows[-1].run_id == run_id else 0
        exec_ticks = int(round(report.exec_ticks))
        row = IterationRow(
            run_id=run_id,
            call_index=report.call_index,
            phase=report.phase,
            candidate=report.candidate,
            compile_ticks=int(report.compile_ticks),
            exec_ticks=exec_ticks,
            cumulative_ticks=prev + int(report.compile_ticks) + exec_ticks,
        )
        self.rows.append(row)
        return row

    def run_ids(self) -> list[int]:
        return sorted({r.run_id for r in self.rows})

    def run(self, run_id: int) -> list[IterationRow]:
        return [r for r in self.rows if r.run_id == run_id]

    def cumulative(self, run_id: int) -> list[int]:
        return [r.cumulative_ticks for r in self.run(run_id)]

    def write_csv(self, fh: io.TextIOBase) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.rows:
            w.writerow([getattr(r, c) for c in LOG_COLUMNS])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)

    @classmethod
    def read_csv(cls, fh: Iterable[str]) -> IterationLog:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LOG_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = [
            IterationRow(
                run_id=int(d["run_id"]),
                call_index=int(d["call_index"]),
                phase=d["phase"],
                candidate=int(d["candidate"]),
                compile_ticks=int(d["compile_ticks"]),
                exec_ticks=int(d["exec_ticks"]),
                cumulative_ticks=int(d["cumulative_ticks"]),
            )
            for d in reader
        ]
        return cls(rows)

    @classmethod
    def from_csv(cls, path: str | Path) -> IterationLog:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.read_csv(fh)


# -- runs -------------------------------------------------------------------


@dataclass
class RunSummary:
    run_id: int
    finalized_index: int | None
    finalized_value: int | None
    total_ticks: int
    compile_ticks: int
    exploration: list[float | None]

    @property
    def gap(self) -> float | None:
        """Relative gap between the best and second-best exploration scores."""
        scores = sorted(s for s in self.exploration if s is not None)
        if len(scores) < 2:
            return None
        best, second = scores[0], scores[1]
        if best <= 0:
            return float("inf") if second > 0 else 0.0
        return (second - best) / best


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    log: IterationLog
    runs: list[RunSummary]

    @property
    def histogram(self) -> Counter:
        return Counter(r.finalized_index for r in self.runs if r.finalized_index is not None)


def run_experiment(
    config: ExperimentConfig,
    *,
    clock: Clock = read_ticks,
    source: MetricSource | None = None,
    log_into: IterationLog | None = None,
    factory: VariantFactory | None = None,
    payload: Any = None,
    on_report: Callable[[int, IterationReport], None] | None = None,
) -> ExperimentResult:
    """``config.runs`` independent tuning runs of ``config.iterations`` calls each.

    Every run gets a fresh registry and cache. Rows go into ``log_into`` as
    they are produced, so a caller holding it keeps the partial log if a
    kernel raises.
    """
    space = config.space
    factory = factory if factory is not None else make_factory(config, clock)
    payload = payload if payload is not None else make_payload(config)
    source = source if source is not None else TickSource(clock)
    tuner_cfg = TunerConfig(replicates_per_candidate=config.replicates)
    it_log = log_into if log_into is not None else IterationLog()
    summaries: list[RunSummary] = []
    if not config.tuning_complete:
        log.warning(
            "iterations=%d < k*replicates+1=%d: tuning will not finish",
            config.iterations,
            space.k * config.replicates + 1,
        )
    for run_id in range(config.runs):
        registry, cache = TuningRegistry(), InstantiationCache()
        site = f"{config.kernel}:{config.n}"
        for _ in range(config.iterations):
            _, report = autotuned_invoke(
                registry, cache, factory, site, config.label, space, payload,
                config=tuner_cfg, source=source, clock=clock,
            )
            it_log.append(run_id, report)
            if on_report is not None:
                on_report(run_id, report)
        handle = registry.lookup_or_create(site, config.label, space, tuner_cfg)
        rows = it_log.run(run_id)
        try:
            idx, final = handle.best_index()
        except LookupError:
            idx, final = None, False
        summaries.append(
            RunSummary(
                run_id=run_id,
                finalized_index=idx if final else None,
                finalized_value=space.candidate(idx) if final else None,
                total_ticks=rows[-1].cumulative_ticks if rows else 0,
                compile_ticks=sum(r.compile_ticks for r in rows),
                exploration=handle.state.scores(tuner_cfg.aggregate),
            )
        )
    return ExperimentResult(config, it_log, summaries)


def run_baseline(
    config: ExperimentConfig,
    index: int,
    *,
    clock: Clock = read_ticks,
    source: MetricSource | None = None,
    factory: VariantFactory | None = None,
    payload: Any = None,
) -> list[int]:
    """Per-call exec ticks of candidate ``index`` with tuning disabled.

    The variant is built once up front and its build is not charged, like an
    ahead-of-time compiled function.
    """
    space = config.space
    factory = factory if factory is not None else make_factory(config, clock)
    payload = payload if payload is not None else make_payload(config)
    source = source if source is not None else TickSource(clock)
    variant = build_variant(factory, space, index, clock)
    return [int(round(timed_call(variant.exec, payload, source)[1].value)) for _ in range(config.iterations)]


def run_baselines(config: ExperimentConfig, **kw: Any) -> dict[int, list[int]]:
    return {i: run_baseline(config, i, **kw) for i in range(config.space.k)}


def observed_break_even(
    auto_cumulative: Sequence[float], baseline_per_call: Sequence[float], min_index: int = 1
) -> int | None:
    """First 1-based call index where the autotuned running total is below the baseline's.

    ``min_index=k+1`` ignores crossings during exploration, where the
    amortization model does not apply.
    """
    for i, (a, b) in enumerate(zip(auto_cumulative, accumulate(baseline_per_call)), start=1):
        if i >= min_index and a < b:
            return i
    return None


def stability_report(result: ExperimentResult, gap_threshold: float = 0.05) -> dict[str, Any]:
    """Split runs into stable/unstable by exploration gap and summarise the choice.

    Runs whose best and second-best candidates are within ``gap_threshold``
    are flagged unstable: the choice between near-equal candidates is noise.
    """
    stable = [r for r in result.runs if r.finalized_index is not None and r.gap is not None and r.gap > gap_threshold]
    unstable = [r for r in result.runs if r not in stable and r.finalized_index is not None]
    hist = Counter(r.finalized_index for r in stable)
    mode, freq = (hist.most_common(1)[0] if hist else (None, 0))
    return {
        "gap_threshold": gap_threshold,
        "stable_runs": [r.run_id for r in stable],
        "unstable_runs": [r.run_id for r in unstable],
        "gaps": {r.run_id: r.gap for r in result.runs},
        "stable_histogram": dict(hist),
        "mode": mode,
        "mode_frequency": freq / len(stable) if stable else None,
        "overall_histogram": dict(result.histogram),
    }
