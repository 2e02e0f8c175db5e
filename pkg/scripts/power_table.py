"""Type I or Type II table over (scheme, T, n) for every detector.

    python3 scripts/power_table.py configs/power.json --out runs/power
    python3 scripts/power_table.py configs/c05_type1.json --metric type1 --out runs/type1
"""

import argparse
import time
from pathlib import Path

from gofmark.harness import Detection, ExperimentConfig, run_type1, run_type2, write_results

from _tables import pivot


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--metric", choices=["type1", "type2"], default="type2")
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config, out=args.out, threads=args.threads)
    t0 = time.perf_counter()
    sweep = run_type1 if args.metric == "type1" else run_type2
    rows = sweep(cfg, Detection(cfg))
    path = write_results(rows, Path(cfg.out) / "results.csv")
    print(pivot(rows, ("scheme", "edit", "T", "n"), "detector"))
    print(f"\n{len(rows)} rows -> {path} ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
