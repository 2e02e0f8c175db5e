"""Type II after edits, one column per detector.

    python3 scripts/robustness_table.py configs/robustness.json --out runs/robust
"""

import argparse
import time
from pathlib import Path

from gofmark.harness import Detection, ExperimentConfig, run_robustness, write_results

from _tables import pivot


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config, out=args.out, threads=args.threads)
    t0 = time.perf_counter()
    rows = run_robustness(cfg, Detection(cfg))
    path = write_results(rows, Path(cfg.out) / "results.csv")
    print(pivot(rows, ("scheme", "edit", "rate", "T", "n"), "detector"))
    print(f"\n{len(rows)} rows -> {path} ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
