"""Repetition rates, CDF dumps and the effect of de-duplicating repeated pivots.

    python3 scripts/repetition_study.py configs/repetition.json --out runs/repetition

Writes the diagnostics CSVs, then a Type II table with raw and de-duplicated
pivots side by side (``edit`` = none / dedupe).
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from gofmark.harness import Detection, ExperimentConfig, report_diagnostics, run_type2, write_results

from _tables import pivot


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--threads", type=int)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config, out=args.out, threads=args.threads, dedupe=True)
    out = Path(cfg.out)
    report_diagnostics(cfg)
    with open(out / "repetition.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            print(f"{r['scheme']:>14} T={r['T']:<4} m={r['m']}  rate={float(r['rate']):.4f}")
    rows = run_type2(cfg, Detection(cfg))
    write_results(rows, out / "results.csv")
    print()
    print(pivot(rows, ("scheme", "T", "n", "detector"), "edit"))
    for T in cfg.temperatures:
        gof = [r for r in rows if r.T == T and r.detector.split("[")[0] in
               ("Phi", "Kol", "Kui", "And", "Cra", "Wat", "Ney", "Chi")]
        raw = np.mean([r.value for r in gof if r.edit == "none"])
        ded = np.mean([r.value for r in gof if r.edit == "dedupe"])
        print(f"T={T}: mean GoF Type II raw {raw:.4f}, dedupe {ded:.4f}")


if __name__ == "__main__":
    main()
