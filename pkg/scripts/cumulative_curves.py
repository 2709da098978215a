"""Cumulative time of the autotuned path against every fixed-candidate baseline.

Writes one CSV with a column per curve, plus the observed and predicted
break-even call for each baseline.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

from jitune.experiment import ExperimentConfig, observed_break_even, run_baselines, run_experiment
from jitune.model import break_even_n


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kernel", default="matmul_order")
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--iterations", type=int, default=60)
    ap.add_argument("--factory", default="jit")
    ap.add_argument("--out", type=Path, default=Path("results/cumulative"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = ExperimentConfig(kernel=args.kernel, n=args.n, iterations=args.iterations, factory=args.factory)
    log = run_experiment(cfg).log
    auto = log.cumulative(0)
    rows = log.run(0)
    k = cfg.space.k
    E = [r.exec_ticks for r in rows[:k]]
    C = sum(r.compile_ticks for r in rows[: k + 1]) / (k + 1)
    baselines = run_baselines(cfg)

    cols = {"autotuned": auto}
    for index, per_call in baselines.items():
        cum, total = [], 0
        for t in per_call:
            total += t
            cum.append(total)
        cols[f"fixed_{cfg.space.candidate(index)}"] = cum
        E_p = sum(per_call) / len(per_call)
        obs = observed_break_even(auto, per_call, min_index=k + 1)
        print(f"candidate {cfg.space.candidate(index)}: model break-even {break_even_n(C, E, E_p)}, observed {obs}")

    with open(args.out / f"{args.kernel}_n{args.n}_cumulative.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["call", *cols])
        for i in range(len(auto)):
            w.writerow([i + 1, *(c[i] for c in cols.values())])


if __name__ == "__main__":
    main()
