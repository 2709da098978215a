"""Command line: ``jitune bench ...`` and ``jitune model ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
from pathlib import Path
from typing import Any, Sequence

from . import model as am
from .errors import InsufficientCalls
from .experiment import (
    ExperimentConfig,
    IterationLog,
    observed_break_even,
    parse_factory,
    run_baselines,
    run_experiment,
    stability_report,
)
from .measurement import CLOCKS, TICKS_PER_SECOND, TickSource
from .tuning import CandidateSpace

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
OUT_ENV = "JITUNE_OUT"

log = logging.getLogger("jitune")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _num_list(text: str) -> list[float | int]:
    out: list[float | int] = []
    for t in text.split(","):
        t = t.strip()
        if not t:
            continue
        try:
            v: float | int = int(t)
        except ValueError:
            try:
                v = float(t)
            except ValueError:
                raise argparse.ArgumentTypeError(f"malformed cost list {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"costs must be non-negative: {text!r}")
        out.append(v)
    if not out:
        raise argparse.ArgumentTypeError("cost list is empty")
    return out


def _number(text: str) -> float | int:
    return _num_list(text)[0] if "," not in text else _fail(text)


def _fail(text: str):
    raise argparse.ArgumentTypeError(f"expected a single number, got {text!r}")


def _factory(text: str) -> str:
    try:
        parse_factory(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jitune", description="Online JIT autotuning benchmarks and cost model.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench", help="run an autotuning experiment")
    b.add_argument("kernel", choices=["matmul-order", "matmul-block", "saxpy-demo", "synthetic"])
    b.add_argument("--n", type=int, default=128, help="matrix / vector size")
    b.add_argument("--iterations", type=int, default=100)
    b.add_argument("--runs", type=int, default=1)
    b.add_argument("--block-sizes", type=_int_list, default=None, help="candidate values, e.g. 4,8,16")
    b.add_argument("--costs", type=_int_list, default=None, help="synthetic kernel: per-candidate ticks")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--factory", type=_factory, default="closure", help="closure | jit | simulated:<ticks>")
    b.add_argument("--metric", choices=sorted(CLOCKS), default="ticks", help="ticks: wall clock; cpu_ticks: thread CPU time")
    b.add_argument("--replicates", type=int, default=1)
    b.add_argument("--no-baselines", action="store_true", help="skip fixed-candidate baseline runs")
    b.add_argument("--gap-threshold", type=float, default=0.05)
    b.add_argument("--out", default="jitune-out")

    m = sub.add_parser("model", help="evaluate the amortization model")
    m.add_argument("--C", dest="C", type=_number, required=True, help="per-compilation cost")
    m.add_argument("--E", dest="E", type=_num_list, required=True, help="variant costs, comma-separated")
    m.add_argument("--Ep", dest="Ep", type=_number, required=True, help="cost of the fixed pick")
    m.add_argument("--N", dest="N", type=int, default=None, help="total number of calls")
    m.add_argument("--log", type=Path, default=None, help="iteration CSV from `bench`")
    m.add_argument("--json", action="store_true", help="machine-readable output")
    return p


# -- bench ------------------------------------------------------------------


def _bench_config(args: argparse.Namespace) -> ExperimentConfig:
    kernel = args.kernel.replace("-", "_")
    candidates = None
    if args.block_sizes is not None:
        if kernel not in ("matmul_block", "saxpy_demo"):
            raise UsageError("--block-sizes only applies to matmul-block and saxpy-demo")
        try:
            candidates = CandidateSpace.parameter_values(args.block_sizes)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    costs = tuple(args.costs) if args.costs else None
    if kernel == "synthetic" and not costs:
        raise UsageError("synthetic kernel needs --costs")
    try:
        return ExperimentConfig(
            kernel=kernel,
            n=args.n,
            iterations=args.iterations,
            runs=args.runs,
            candidates=candidates,
            factory=args.factory,
            seed=args.seed,
            replicates=args.replicates,
            synthetic_costs=costs,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model_vs_measured(rows, k: int, baselines: dict[int, list[int]]) -> list[dict[str, Any]]:
    compiles = [r.compile_ticks for r in rows if r.phase != "tuned" and r.compile_ticks > 0]
    explore: dict[int, int] = {}
    for r in rows:
        if r.phase == "exploring":
            explore[r.candidate] = min(explore.get(r.candidate, r.exec_ticks), r.exec_ticks)
    N = len(rows)
    if len(explore) < k or N < k + 1 or not compiles:
        return []
    C = statistics.fmean(compiles)
    E = [explore[i] for i in range(k)]
    measured = rows[-1].cumulative_ticks
    out = []
    for p, per_call in sorted(baselines.items()):
        Ep = statistics.fmean(per_call) if per_call else 0.0
        inputs = am.AmortizationInputs(C, tuple(E), Ep, N)
        model_total = am.e_auto(inputs)
        out.append(
            {
                "baseline": p,
                "C": C,
                "E": E,
                "E_p": Ep,
                "N": N,
                "model_e_auto": model_total,
                "measured_total": measured,
                "deviation": (measured - model_total) / model_total if model_total else None,
                "model_break_even": am.break_even_n(C, E, Ep),
                "observed_break_even": observed_break_even([r.cumulative_ticks for r in rows], per_call, min_index=k + 1),
            }
        )
    return out


def cmd_bench(args: argparse.Namespace) -> int:
    config = _bench_config(args)
    out_dir = Path(os.environ.get(OUT_ENV) or args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = config.space
    if not config.tuning_complete:
        print(
            f"warning: tuning incomplete: {config.iterations} iterations < "
            f"{space.k * config.replicates + 1} needed for {space.k} candidates; log is partial",
            file=sys.stderr,
        )

    clock = CLOCKS[args.metric]
    measure_kw = dict(clock=clock, source=TickSource(clock, args.metric))
    it_log = IterationLog()
    try:
        result = run_experiment(config, log_into=it_log, **measure_kw)
    except Exception as exc:
        it_log.to_csv(out_dir / "iterations.csv")
        print(f"error: {type(exc).__name__}: {exc} (partial log in {out_dir / 'iterations.csv'})", file=sys.stderr)
        return EXIT_RUNTIME
    it_log.to_csv(out_dir / "iterations.csv")

    baselines: dict[int, list[int]] = {}
    if not args.no_baselines:
        try:
            baselines = run_baselines(config, **measure_kw)
        except Exception as exc:
            print(f"error: baseline run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        with open(out_dir / "baselines.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["candidate", "call_index", "exec_ticks", "cumulative_ticks"])
            for cand, per_call in sorted(baselines.items()):
                total = 0
                for i, t in enumerate(per_call, start=1):
                    total += t
                    w.writerow([cand, i, t, total])

    with open(out_dir / "histogram.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate", "value", "count"])
        hist = result.histogram
        for i in range(space.k):
            w.writerow([i, space.candidate(i), hist.get(i, 0)])

    runs = []
    for s in result.runs:
        rows = it_log.run(s.run_id)
        runs.append(
            {
                "run_id": s.run_id,
                "finalized_candidate": s.finalized_index,
                "finalized_value": s.finalized_value,
                "total_ticks": s.total_ticks,
                "total_seconds": s.total_ticks / TICKS_PER_SECOND,
                "compile_ticks": s.compile_ticks,
                "exploration_gap": s.gap,
                "break_even": {
                    str(p): observed_break_even([r.cumulative_ticks for r in rows], per_call)
                    for p, per_call in sorted(baselines.items())
                },
                "model_vs_measured": _model_vs_measured(rows, space.k, baselines),
            }
        )
    summary = {
        "config": {
            "kernel": config.kernel,
            "n": config.n,
            "iterations": config.iterations,
            "runs": config.runs,
            "candidates": [space.candidate(i) for i in range(space.k)],
            "candidate_kind": space.kind,
            "factory": config.factory,
            "seed": config.seed,
            "replicates": config.replicates,
            "metric": args.metric,
        },
        "tuning_complete": config.tuning_complete,
        "histogram": {str(i): c for i, c in sorted(result.histogram.items())},
        "stability": stability_report(result, args.gap_threshold),
        "runs": runs,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, default=str)
        fh.write("\n")

    for s in result.runs:
        choice = "unfinished" if s.finalized_index is None else f"{s.finalized_index} (value {s.finalized_value})"
        print(f"run {s.run_id}: chose {choice}, total {s.total_ticks / TICKS_PER_SECOND:.4f} s")
    print(f"wrote {out_dir}/iterations.csv, histogram.csv, summary.json" + ("" if args.no_baselines else ", baselines.csv"))
    return EXIT_OK


# -- model ------------------------------------------------------------------


def _log_comparison(path: Path) -> list[dict[str, Any]]:
    it_log = IterationLog.from_csv(path)
    out = []
    for run_id in it_log.run_ids():
        rows = it_log.run(run_id)
        compiles = [r.compile_ticks for r in rows if r.compile_ticks > 0]
        explore: dict[int, int] = {}
        for r in rows:
            if r.phase == "exploring":
                explore[r.candidate] = min(explore.get(r.candidate, r.exec_ticks), r.exec_ticks)
        kk = len(explore)
        if not compiles or len(rows) < kk + 1 or kk == 0:
            out.append({"run_id": run_id, "error": "run did not finish tuning"})
            continue
        inputs = am.AmortizationInputs(statistics.fmean(compiles), tuple(explore[i] for i in sorted(explore)), 0, len(rows))
        model_total = am.e_auto(inputs)
        measured = rows[-1].cumulative_ticks
        out.append(
            {
                "run_id": run_id,
                "C": inputs.C,
                "E": list(inputs.E),
                "N": inputs.N,
                "model_e_auto": model_total,
                "measured_total": measured,
                "deviation": (measured - model_total) / model_total if model_total else None,
            }
        )
    return out


def cmd_model(args: argparse.Namespace) -> int:
    C, E, Ep, N = args.C, args.E, args.Ep, args.N
    k = len(E)
    result: dict[str, Any] = {"C": C, "E": E, "E_p": Ep, "k": k, "E_0": min(E)}
    bn = am.break_even_n(C, E, Ep)
    result["break_even_n"] = bn
    if N is not None:
        try:
            inputs = am.AmortizationInputs(C, tuple(E), Ep, N)
            result["N"] = N
            result["e_auto"] = am.e_auto(inputs)
            result["N_times_E_p"] = N * Ep
            result["net_gain"] = am.net_gain(inputs)
            result["e_auto_alternatives"] = am.e_auto_alternatives(inputs)
        except (InsufficientCalls, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    regime = am.regime_report(C, E, Ep, N)
    result["regime"] = [
        {"label": i.label, "value": i.value, "favorable": i.favorable, "detail": i.detail} for i in regime.indicators
    ]
    if args.log is not None:
        try:
            result["log_comparison"] = _log_comparison(args.log)
        except (OSError, ValueError) as exc:
            print(f"error: cannot read log {args.log}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME

    if args.json:
        print(json.dumps(result, indent=2, default=str))
        return EXIT_OK

    print(f"k = {k}, E_0 = min(E) = {min(E)}")
    print(f"break-even N = {bn}" if bn is not None else "no finite break-even")
    if N is not None:
        print(f"E_auto = {result['e_auto']}")
        print(f"N*E_p = {result['N_times_E_p']}")
        verdict = "tuning pays off" if result["net_gain"] >= 0 else "tuning does not pay off"
        print(f"net_gain = {result['net_gain']} ({verdict})")
        alt = result["e_auto_alternatives"]
        print(
            f"  schedule total {alt['schedule']}; "
            f"N+1-execution bookkeeping {alt['sum_form']}; "
            f"N-1-execution bookkeeping {alt['closed_form']}"
        )
    for line in regime.lines():
        print(line)
    for row in result.get("log_comparison", []):
        if "error" in row:
            print(f"log run {row['run_id']}: {row['error']}")
        else:
            dev = row["deviation"]
            print(
                f"log run {row['run_id']}: model E_auto {row['model_e_auto']:.6g}, "
                f"measured {row['measured_total']}, deviation {dev:+.2%}" if dev is not None else
                f"log run {row['run_id']}: model E_auto 0, measured {row['measured_total']}"
            )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_model(args)
    except UsageError as exc:
        print(f"jitune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
