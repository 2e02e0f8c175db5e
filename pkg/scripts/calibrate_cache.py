"""Fill the critical-value cache for every (scheme, detector, n) in a config.

    python3 scripts/calibrate_cache.py configs/power.json --out runs/power
"""

import argparse
import time

from gofmark.harness import ExperimentConfig, calibrate_all


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config, out=args.out, threads=args.threads)
    t0 = time.perf_counter()
    table = calibrate_all(cfg)
    for rec in sorted(table, key=lambda r: (r.scheme, r.detector, r.n)):
        print(f"{rec.scheme:>14} {rec.detector:>16} n={rec.n:<4} alpha={rec.alpha:<6} gamma={rec.gamma:.6g}")
    print(f"{len(table)} values in {cfg.cache_path} ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
