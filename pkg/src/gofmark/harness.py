"""Experiment orchestration: Type I/II sweeps, robustness sweeps and diagnostics.

Every trial ``i`` of a sweep draws its key, SynthID nonce, plain-text stream and
edit randomness from ``mix64(master_seed ^ i)``.  Trials are processed in
fixed-size chunks, so the worker count changes wall time but never results.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import SCHEME_BASELINES
from .calibrate import CriticalTable
from .edits import EditKind, EditSpec, delete_tokens, edit_count, inforich_values, substitute_tokens
from .gof import GOF_NAMES, Detector, make_detector, parse_detector, statistic, to_pvalues
from .prng import MASK64, mix64
from .schemes import Kind, SchemeSpec
from .textsim import (SimModel, dedupe_mask, extract_batch, generate_plain_batch,
                      generate_watermarked_batch, repetition_rate)

log = logging.getLogger(__name__)

RESULT_HEADER = ("scheme", "detector", "T", "n", "edit", "rate", "metric", "value", "trials", "seed")
KEY_SALT = 0x6B65796B65796B65
EDIT_SALT = 0x3D17ED173D17ED17
HIST_BINS = 50


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _tuple(v, cast=None):
    if isinstance(v, (str, bytes)) or not hasattr(v, "__iter__"):
        v = (v,)
    return tuple(cast(x) if cast else x for x in v)


@dataclass
class ExperimentConfig:
    schemes: tuple = ("gumbel", "inverse", "synthid")
    detectors: tuple = ()  # empty: every GoF test plus the scheme's baselines
    temperatures: tuple = (0.1, 0.3, 0.7, 1.0)
    lengths: tuple = (200, 400)
    trials: int = 1000
    alpha: float = 0.01
    edits: tuple = ()
    vocab: int = 1000
    beta: float = 3.0
    sigma: float = 6.0
    window: int = 4
    model_seed: int = 20240601
    seed: int = 0
    calib_b: int = 100_000
    calib_seed: int = 1
    dedupe: bool = False
    chunk: int = 100
    threads: int = 1
    out: str = "runs"
    cache: str | None = None

    def __post_init__(self):
        try:
            self.schemes = _tuple(self.schemes, str)
            self.detectors = _tuple(self.detectors, str)
            self.temperatures = _tuple(self.temperatures, float)
            self.lengths = _tuple(self.lengths, int)
            self.edits = _tuple(self.edits, str)
            self.scheme_specs = [SchemeSpec.parse(s) for s in self.schemes]
            self.detector_specs = [parse_detector(d) for d in self.detectors]
            self.edit_specs = [parse_edit(e) for e in self.edits]
            self.model = SimModel(V=int(self.vocab), beta=float(self.beta), sigma=float(self.sigma),
                                  m=int(self.window), seed=int(self.model_seed))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.lengths or min(self.lengths) < 1:
            raise ConfigError("lengths must be positive")
        if not self.temperatures or min(self.temperatures) <= 0:
            raise ConfigError("temperatures must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.alpha * (self.calib_b + 1) < 1:
            raise ConfigError(f"calib_b={self.calib_b} is too small for alpha={self.alpha}")
        if self.chunk < 1 or self.threads < 1:
            raise ConfigError("chunk and threads must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        return cls(**merged)

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(data, **overrides)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in dataclasses.fields(self)}

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def cache_path(self) -> Path:
        return Path(self.cache) if self.cache else Path(self.out) / "criticals.csv"

    def detectors_for(self, scheme: SchemeSpec) -> list[Detector]:
        if self.detector_specs:
            return [d for d in self.detector_specs
                    if not (d.name == "Lst" and scheme.kind is not Kind.GUMBEL)]
        names = GOF_NAMES + SCHEME_BASELINES[scheme.kind]
        return [make_detector(n) for n in names]


def parse_edit(text) -> EditSpec:
    """``"Del@0.2"``-style label (the edit seed is assigned per trial)."""
    if isinstance(text, EditSpec):
        return text
    kind, sep, rate = str(text).partition("@")
    if not sep:
        raise ValueError(f"edit {text!r} must look like Kind@rate")
    return EditSpec(kind, float(rate))


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    detector: str
    T: float
    n: int
    edit: str
    rate: float
    metric: str
    value: float
    trials: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("error fractions lie in [0, 1]")

    def fields(self) -> list[str]:
        return [self.scheme, self.detector, repr(float(self.T)), str(self.n), self.edit,
                repr(float(self.rate)), self.metric, repr(float(self.value)), str(self.trials),
                str(self.seed)]

    @property
    def sort_key(self):
        return (self.scheme, self.metric, self.edit, self.rate, self.T, self.n, self.detector)


def write_results(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in sorted(rows, key=lambda r: r.sort_key):
            w.writerow(r.fields())
    return path


def read_results(path) -> list[ResultRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        return [ResultRow(r["scheme"], r["detector"], float(r["T"]), int(r["n"]), r["edit"],
                          float(r["rate"]), r["metric"], float(r["value"]), int(r["trials"]),
                          int(r["seed"])) for r in rd]


# --- per-trial randomness --------------------------------------------------

def trial_seeds(master: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.uint64)
    return mix64(np.uint64(master & MASK64) ^ idx)


def trial_keys(seeds) -> list[bytes]:
    return [int(mix64(int(s) ^ KEY_SALT)).to_bytes(8, "little") for s in seeds]


def edit_seed(seed: int) -> int:
    return mix64(int(seed) ^ EDIT_SALT)


def _chunks(trials: int, size: int):
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _watermarked(cfg: ExperimentConfig, scheme: SchemeSpec, T: float, n: int):
    """Tokens, pivots and keys for every trial of one (scheme, T) cell."""

    def work(bounds):
        seeds = trial_seeds(cfg.seed, *bounds)
        keys = trial_keys(seeds)
        tok, y, top = generate_watermarked_batch(cfg.model, scheme, keys, n, T, nonces=seeds)
        return tok, y, top, keys

    parts = _map(work, _chunks(cfg.trials, cfg.chunk), cfg.threads)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]), [k for p in parts for k in p[3]])


def _plain(cfg: ExperimentConfig, T: float, n: int):
    def work(bounds):
        return generate_plain_batch(cfg.model, n, T, trial_seeds(cfg.seed, *bounds))[0]

    return np.concatenate(_map(work, _chunks(cfg.trials, cfg.chunk), cfg.threads))


def _extract(cfg, tokens, keys, scheme, lengths=None):
    def work(bounds):
        a, b = bounds
        lens = None if lengths is None else lengths[a:b]
        return extract_batch(tokens[a:b], keys[a:b], scheme, cfg.model.m, cfg.model.V, lens)

    parts = _map(work, _chunks(len(keys), cfg.chunk), cfg.threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- detection -------------------------------------------------------------

class Detection:
    """Critical-value lookups for one config; calibrates on demand and caches."""

    def __init__(self, cfg: ExperimentConfig, table: CriticalTable | None = None):
        self.cfg = cfg
        self.table = table if table is not None else CriticalTable(cfg.cache_path)

    def criticals(self, scheme, detectors, n):
        recs = self.table.resolve(scheme, detectors, n, self.cfg.alpha, self.cfg.calib_b,
                                  self.cfg.calib_seed, self.cfg.threads)
        return {label: r.gamma for label, r in recs.items()}

    def reject(self, scheme, detectors, y) -> dict[str, np.ndarray]:
        """Reject flags per detector for the rows of an equal-length pivot matrix."""
        y = np.atleast_2d(y)
        gam = self.criticals(scheme, detectors, y.shape[1])
        return {d.label: np.asarray(statistic(d, y, scheme)) > gam[d.label] for d in detectors}

    def reject_ragged(self, scheme, detectors, rows) -> dict[str, np.ndarray]:
        """Same as :meth:`reject` for pivot rows of varying length."""
        out = {d.label: np.zeros(len(rows), dtype=bool) for d in detectors}
        by_len: dict[int, list[int]] = {}
        for i, r in enumerate(rows):
            by_len.setdefault(len(r), []).append(i)
        for n in sorted(by_len):
            idx = by_len[n]
            flags = self.reject(scheme, detectors, np.array([rows[i] for i in idx]))
            for label, f in flags.items():
                out[label][idx] = f
        return out


def _rows(cfg, scheme, flags, T, n, edit, rate, metric):
    rows = []
    for label, f in flags.items():
        frac = float(np.mean(f)) if metric == "type1" else float(np.mean(~f))
        rows.append(ResultRow(scheme.name, label, T, n, edit, rate, metric, frac, cfg.trials,
                              cfg.seed))
    return rows


# --- sweeps ----------------------------------------------------------------

def run_type1(cfg: ExperimentConfig, detection: Detection | None = None) -> list[ResultRow]:
    """Rejection rates on plain (key-independent) text extracted against per-trial keys."""
    det = detection or Detection(cfg)
    nmax = max(cfg.lengths)
    rows = []
    keys = trial_keys(trial_seeds(cfg.seed, 0, cfg.trials))
    for T in cfg.temperatures:
        tokens = _plain(cfg, T, nmax)
        for scheme in cfg.scheme_specs:
            y, _ = _extract(cfg, tokens, keys, scheme)
            dets = cfg.detectors_for(scheme)
            for n in cfg.lengths:
                flags = det.reject(scheme, dets, y[:, :n])
                rows += _rows(cfg, scheme, flags, T, n, "none", 0.0, "type1")
    return rows


def run_type2(cfg: ExperimentConfig, detection: Detection | None = None) -> list[ResultRow]:
    """Miss rates on watermarked text.

    Generation is causal, so each length is evaluated on prefixes of the
    longest run.  With ``dedupe`` set, rows for de-duplicated pivots are added
    under the edit label ``dedupe``.
    """
    det = detection or Detection(cfg)
    nmax = max(cfg.lengths)
    rows = []
    for scheme in cfg.scheme_specs:
        dets = cfg.detectors_for(scheme)
        for T in cfg.temperatures:
            tokens, y, _, keys = _watermarked(cfg, scheme, T, nmax)
            seeds = _extract(cfg, tokens, keys, scheme)[1] if cfg.dedupe else None
            for n in cfg.lengths:
                rows += _rows(cfg, scheme, det.reject(scheme, dets, y[:, :n]), T, n,
                              "none", 0.0, "type2")
                if cfg.dedupe:
                    kept = [y[i, :n][dedupe_mask(tokens[i, :n], seeds[i, :n])]
                            for i in range(cfg.trials)]
                    rows += _rows(cfg, scheme, det.reject_ragged(scheme, dets, kept), T, n,
                                  "dedupe", 0.0, "type2")
    return rows


def apply_edit(cfg, scheme, spec: EditSpec, tokens, y, keys, seeds):
    """Edited pivot matrix for one edit; token edits are always re-extracted."""
    if spec.kind is EditKind.INFORICH:
        return np.array([inforich_values(y[i], spec.rate, edit_seed(s), scheme)
                         for i, s in enumerate(seeds)])
    if spec.kind is EditKind.DELETE:
        edited = np.array([delete_tokens(tokens[i], spec.rate, edit_seed(s))
                           for i, s in enumerate(seeds)])
    else:
        edited = np.array([substitute_tokens(tokens[i], spec.rate, edit_seed(s), cfg.model.V)
                           for i, s in enumerate(seeds)])
    return _extract(cfg, edited, keys, scheme)[0]


def run_robustness(cfg: ExperimentConfig, detection: Detection | None = None) -> list[ResultRow]:
    """Miss rates after each configured edit, next to the unedited baseline."""
    if not cfg.edit_specs:
        raise ConfigError("robustness sweeps need at least one edit")
    for n in cfg.lengths:
        for spec in cfg.edit_specs:
            if edit_count(spec.rate, n) < 1:
                raise ConfigError(f"{spec.label} edits no token at n={n}")
    det = detection or Detection(cfg)
    nmax = max(cfg.lengths)
    seeds = trial_seeds(cfg.seed, 0, cfg.trials)
    rows = []
    for scheme in cfg.scheme_specs:
        dets = cfg.detectors_for(scheme)
        for T in cfg.temperatures:
            tokens, y, _, keys = _watermarked(cfg, scheme, T, nmax)
            for n in cfg.lengths:
                rows += _rows(cfg, scheme, det.reject(scheme, dets, y[:, :n]), T, n,
                              "none", 0.0, "type2")
                for spec in cfg.edit_specs:
                    ye = apply_edit(cfg, scheme, spec, tokens[:, :n], y[:, :n], keys, seeds)
                    rows += _rows(cfg, scheme, det.reject(scheme, dets, ye), T, n,
                                  spec.kind.value, spec.rate, "type2")
    return rows


def calibrate_all(cfg: ExperimentConfig, table: CriticalTable | None = None) -> CriticalTable:
    """Fill the critical-value cache for every (scheme, detector, n) in the config."""
    det = Detection(cfg, table)
    for scheme in cfg.scheme_specs:
        for n in cfg.lengths:
            det.criticals(scheme, cfg.detectors_for(scheme), n)
    return det.table


# --- diagnostics -----------------------------------------------------------

def _tag(scheme: SchemeSpec, T: float) -> str:
    return f"{scheme.kind.value}_T{T:g}"


def report_diagnostics(cfg: ExperimentConfig, out: str | Path | None = None) -> list[Path]:
    """CDF dumps, repetition-rate table and top-probability histograms as CSV."""
    out = Path(out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    nmax = max(cfg.lengths)
    written = []
    rep_rows, hist_rows = [], []
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    for scheme in cfg.scheme_specs:
        for T in cfg.temperatures:
            tokens, y, top, keys = _watermarked(cfg, scheme, T, nmax)
            _, seeds = _extract(cfg, tokens[:1], keys[:1], scheme)
            f0 = np.sort(1.0 - to_pvalues(y[0], scheme))
            path = out / f"cdf_{_tag(scheme, T)}.csv"
            _write_cdf(path, f0)
            written.append(path)
            kept = y[0][dedupe_mask(tokens[0], seeds[0])]
            path = out / f"cdf_dedupe_{_tag(scheme, T)}.csv"
            _write_cdf(path, np.sort(1.0 - to_pvalues(kept, scheme)))
            written.append(path)
            for m in range(1, cfg.model.m + 1):
                if nmax > m:
                    rate = float(np.mean([repetition_rate(t, m) for t in tokens]))
                    rep_rows.append([scheme.name, repr(T), m, repr(rate), cfg.trials])
            counts, _ = np.histogram(np.clip(top.ravel(), 0.0, 1.0), bins=edges)
            for b in range(HIST_BINS):
                hist_rows.append([scheme.name, repr(T), repr(float(edges[b])),
                                  repr(float(edges[b + 1])), repr(float(counts[b] / top.size))])
    written.append(_write_csv(out / "repetition.csv", ["scheme", "T", "m", "rate", "runs"], rep_rows))
    written.append(_write_csv(out / "top_prob_hist.csv",
                              ["scheme", "T", "bin_lo", "bin_hi", "fraction"], hist_rows))
    return written


def _write_cdf(path: Path, f0: np.ndarray):
    n = f0.size
    rows = [[i + 1, repr(float(v)), repr((i + 1) / n)] for i, v in enumerate(f0)]
    _write_csv(path, ["rank", "f0", "uniform"], rows)


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def lookup(rows, **match) -> ResultRow:
    """The unique row whose fields equal ``match`` (e.g. ``detector="Kol[...]"``)."""
    hits = [r for r in rows if all(_eq(getattr(r, k), v) for k, v in match.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} rows match {match}")
    return hits[0]


def _eq(a, b):
    if isinstance(a, float):
        return math.isclose(a, float(b), rel_tol=0, abs_tol=1e-12)
    if isinstance(a, str) and isinstance(b, str) and "[" not in b:
        return a == b or a.split("[")[0] == b
    return a == b


__all__ = [
    "ConfigError", "ExperimentConfig", "ResultRow", "RESULT_HEADER", "Detection",
    "run_type1", "run_type2", "run_robustness", "report_diagnostics", "calibrate_all",
    "write_results", "read_results", "trial_seeds", "trial_keys", "parse_edit", "lookup",
]
