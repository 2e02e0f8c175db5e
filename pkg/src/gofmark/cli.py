"""Command-line entry point: ``gofmark <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .calibrate import CriticalTable
from .gof import detect, parse_detector
from .harness import (ConfigError, Detection, ExperimentConfig, calibrate_all, report_diagnostics,
                      run_robustness, run_type1, run_type2, write_results)
from .prng import _as_key
from .schemes import SchemeSpec
from .textsim import extract_pivots, generate_watermarked

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _shared(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (speed only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gofmark", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("calibrate", "fill the critical-value cache"),
                       ("type1", "Type I errors on plain text"),
                       ("type2", "Type II errors on watermarked text"),
                       ("robustness", "Type II errors after edits"),
                       ("diagnostics", "CDF dumps, repetition and top-probability tables")]:
        _shared(sub.add_parser(name, help=text))

    g = sub.add_parser("generate", help="write one watermarked record as CSV")
    _shared(g)
    g.add_argument("--scheme", default="gumbel")
    g.add_argument("--key", required=True, help="secret key as hex")
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--T", type=float, default=1.0)
    g.add_argument("--nonce", type=int, default=0)

    d = sub.add_parser("detect", help="test one sequence for a watermark")
    _shared(d)
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--pivots", help="CSV with a 'pivot' column")
    src.add_argument("--tokens", help="CSV with a 'token' column")
    d.add_argument("--key", help="secret key as hex (with --tokens)")
    d.add_argument("--scheme", default="gumbel")
    d.add_argument("--m", type=int, help="context window (with --tokens)")
    d.add_argument("--test", default="Phi", help="detector label, e.g. Kui or Chi[bins=20]")
    d.add_argument("--alpha", type=float, help="significance level")
    return parser


def load_config(args) -> ExperimentConfig:
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads}
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    if args.config:
        return ExperimentConfig.from_json(args.config, **overrides)
    return ExperimentConfig.from_dict({}, **overrides)


def _read_column(path, name) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or name not in rd.fieldnames:
            raise ConfigError(f"{path}: no '{name}' column")
        vals = [row[name] for row in rd]
    if not vals:
        raise ConfigError(f"{path}: no rows")
    try:
        return np.array([float(v) for v in vals])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_generate(cfg, args) -> dict:
    scheme = SchemeSpec.parse(args.scheme)
    rec = generate_watermarked(cfg.model, scheme, _as_key(args.key), args.n, args.T, args.nonce)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "record.csv"
    rec.to_csv(path)
    return {"record": str(path), "n": args.n, "scheme": scheme.name, "T": args.T}


def cmd_detect(cfg, args) -> dict:
    scheme = SchemeSpec.parse(args.scheme)
    if args.tokens:
        if not args.key:
            raise ConfigError("--tokens needs --key")
        m = args.m if args.m is not None else cfg.model.m
        tokens = _read_column(args.tokens, "token").astype(np.int64)
        pivots = extract_pivots(tokens, _as_key(args.key), scheme, m, cfg.model.V).values
    else:
        pivots = _read_column(args.pivots, "pivot")
    det = parse_detector(args.test)
    table = CriticalTable(cfg.cache_path)
    recs = table.resolve(scheme, [det], pivots.size, cfg.alpha, cfg.calib_b, cfg.calib_seed,
                         cfg.threads)
    verdict = detect(pivots, det, recs[det.label], cfg.alpha, scheme)
    result = {"scheme": scheme.name, "detector": verdict.detector, "n": verdict.n,
              "statistic": verdict.statistic, "gamma": verdict.gamma, "alpha": verdict.alpha,
              "reject": verdict.reject}
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    (Path(cfg.out) / "verdict.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    return result


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg.out)
        if args.command in ("type1", "type2", "robustness"):
            sweep = {"type1": run_type1, "type2": run_type2, "robustness": run_robustness}
            rows = sweep[args.command](cfg, Detection(cfg))
            path = write_results(rows, out / "results.csv")
            print(f"wrote {len(rows)} rows to {path}")
        elif args.command == "calibrate":
            table = calibrate_all(cfg)
            print(f"{len(table)} critical values in {cfg.cache_path}")
        elif args.command == "diagnostics":
            for p in report_diagnostics(cfg):
                print(p)
        elif args.command == "generate":
            print(json.dumps(cmd_generate(cfg, args)))
        elif args.command == "detect":
            print(json.dumps(cmd_detect(cfg, args)))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
