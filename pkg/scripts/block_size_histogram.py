"""Block-size choice histogram for the tiled matmul across matrix sizes.

    python scripts/block_size_histogram.py --sizes 128 256 512 --runs 5 --out results/blocks
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import replace
from pathlib import Path

from jitune.experiment import ExperimentConfig, run_experiment, stability_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--factory", default="closure")
    ap.add_argument("--out", type=Path, default=Path("results/blocks"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for n in args.sizes:
        cfg = ExperimentConfig(kernel="matmul_block", n=n, runs=args.runs, factory=args.factory)
        cfg = replace(cfg, iterations=cfg.space.k + 3)
        result = run_experiment(cfg)
        rep = stability_report(result)
        for index, count in sorted(result.histogram.items()):
            rows.append({"n": n, "block": cfg.space.candidate(index), "count": count,
                         "unstable_runs": len(rep["unstable_runs"])})
        index, count = result.histogram.most_common(1)[0]
        print(f"n={n}: mode block {cfg.space.candidate(index)} in {count}/{args.runs} runs, "
              f"{len(rep['unstable_runs'])} runs within 5% of their runner-up")

    with open(args.out / "block_histogram.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["n", "block", "count", "unstable_runs"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
