"""Per-iteration compile and execution ticks for loop-order matmul at three sizes.

Uses freshly compiled specializations so the exploration calls carry a real
compile cost.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from jitune.experiment import ExperimentConfig, IterationLog, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--iterations", type=int, default=20)
    ap.add_argument("--factory", default="jit")
    ap.add_argument("--out", type=Path, default=Path("results/overhead"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for n in args.sizes:
        cfg = ExperimentConfig(kernel="matmul_order", n=n, iterations=args.iterations, factory=args.factory)
        log = IterationLog()
        run_experiment(cfg, log_into=log)
        log.to_csv(args.out / f"matmul_order_n{n}.csv")
        rows = log.run(0)
        compile_total = sum(r.compile_ticks for r in rows)
        steady = [r.exec_ticks for r in rows if r.phase == "tuned"]
        builds = sum(r.compile_ticks > 0 for r in rows)
        line = f"n={n}: compile {compile_total / 1e6:.1f} ms over {builds} builds"
        if steady:
            line += f", steady exec {min(steady) / 1e6:.2f} ms"
        print(line)


if __name__ == "__main__":
    main()
