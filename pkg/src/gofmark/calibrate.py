"""Critical values: Monte-Carlo calibration under the null, chi-squared limits, and a file cache."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import sum_statistic
from .chi2dist import chi2_ppf_upper
from .gof import EPS, Detector, gof_statistic, make_detector
from .schemes import SchemeSpec, null_cdf_array, null_ppf

log = logging.getLogger(__name__)

#: Rows simulated per batch; fixed so results never depend on the worker count.
BATCH_ROWS = 5000
CACHE_HEADER = "scheme,detector,params,n,alpha,B,seed,gamma"


class InsufficientSimulationError(ValueError):
    pass


class CacheParseError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalRecord:
    scheme: str
    detector: str
    n: int
    alpha: float
    B: int
    seed: int
    gamma: float

    @property
    def key(self):
        return (self.scheme, self.detector, self.n, float(self.alpha), self.B, self.seed)


def order_stat_index(alpha: float, B: int) -> int:
    """1-based index ``ceil((1 - alpha)(B + 1))`` of the conservative quantile."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    k = math.ceil((1.0 - alpha) * (B + 1) - 1e-9)
    if k > B:
        need = math.ceil(1.0 / alpha) - 1
        raise InsufficientSimulationError(
            f"alpha={alpha} needs at least B={need} simulated statistics, got B={B}")
    return max(k, 1)


def critical_from_samples(stats, alpha: float) -> float:
    s = np.sort(np.asarray(stats, dtype=float))
    return float(s[order_stat_index(alpha, s.size) - 1])


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(batch,))))


def simulate_null_pivots(scheme: SchemeSpec, n: int, rows: int, seed: int, batch: int = 0):
    """``rows x n`` i.i.d. null pivots for one batch (inverse CDF of uniforms)."""
    u = _batch_rng(seed, batch).random((rows, n))
    return null_ppf(scheme, u)


def _batch_stats(scheme, detectors, n, rows, seed, batch):
    y = simulate_null_pivots(scheme, n, rows, seed, batch)
    out = {}
    gof = [d for d in detectors if d.is_gof]
    if gof:
        p = np.clip(1.0 - null_cdf_array(scheme, y), EPS, 1.0 - EPS)
        p.sort(axis=1)
        for d in gof:
            out[d.label] = np.asarray(gof_statistic(d, p, presorted=True))
    for d in detectors:
        if not d.is_gof:
            out[d.label] = np.asarray(sum_statistic(y, d, scheme))
    return out


def null_statistics(scheme: SchemeSpec, detectors, n: int, B: int, seed: int, threads: int = 1):
    """Simulated null statistics for each detector, keyed by detector label."""
    detectors = [make_detector(d) if isinstance(d, str) else d for d in detectors]
    nbatch = -(-B // BATCH_ROWS)
    sizes = [min(BATCH_ROWS, B - j * BATCH_ROWS) for j in range(nbatch)]

    def work(j):
        return _batch_stats(scheme, detectors, n, sizes[j], seed, j)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(work, range(nbatch)))
    else:
        parts = [work(j) for j in range(nbatch)]
    return {d.label: np.concatenate([p[d.label] for p in parts]) for d in detectors}


def mc_criticals(scheme: SchemeSpec, detectors, n: int, alpha: float, B: int = 100_000,
                 seed: int = 0, threads: int = 1) -> dict[str, CriticalRecord]:
    """Calibrate several detectors from one shared set of simulated null streams."""
    order_stat_index(alpha, B)
    stats = null_statistics(scheme, detectors, n, B, seed, threads)
    return {label: CriticalRecord(scheme.name, label, n, alpha, B, seed,
                                  critical_from_samples(s, alpha))
            for label, s in stats.items()}


def mc_critical(scheme: SchemeSpec, detector, n: int, alpha: float, B: int = 100_000,
                seed: int = 0, threads: int = 1) -> float:
    """Conservative Monte-Carlo critical value for one detector."""
    det = make_detector(detector) if isinstance(detector, str) else detector
    return mc_criticals(scheme, [det], n, alpha, B, seed, threads)[det.label].gamma


def asymptotic_critical(detector, alpha: float) -> float:
    """Chi-squared limit: ``Ney(k)`` has k degrees of freedom, ``Chi(bins)`` has bins - 1."""
    det = make_detector(detector) if isinstance(detector, str) else detector
    params = det.param_dict
    if det.name == "Ney":
        df = int(params.get("k", 3))
    elif det.name == "Chi":
        df = int(params.get("bins", 10)) - 1
    else:
        raise ValueError(f"no chi-squared limit for {det.name}")
    if df < 1:
        raise ValueError("need at least one degree of freedom")
    return chi2_ppf_upper(alpha, df)


class CriticalTable:
    """Critical values keyed exactly by (scheme, detector, n, alpha, B, seed).

    With a ``path`` the table mirrors a CSV cache file; ``put`` appends one line.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[tuple, CriticalRecord] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            return
        if lines[0].strip() != CACHE_HEADER:
            raise CacheParseError(f"{self.path}:1: bad header {lines[0]!r}")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            rec = _parse_line(line, f"{self.path}:{lineno}")
            self._records[rec.key] = rec

    def get(self, scheme, detector, n, alpha, B, seed) -> CriticalRecord | None:
        if self.path is not None and not self.path.exists():
            self._records.clear()
        key = (_scheme_name(scheme), _det_label(detector), int(n), float(alpha), int(B), int(seed))
        return self._records.get(key)

    def put(self, record: CriticalRecord) -> CriticalRecord:
        if not math.isfinite(record.gamma):
            raise ValueError("critical value must be finite")
        self._records[record.key] = record
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new = not self.path.exists() or self.path.stat().st_size == 0
            with open(self.path, "a", encoding="utf-8") as fh:
                if new:
                    fh.write(CACHE_HEADER + "\n")
                fh.write(_format_line(record) + "\n")
        return record

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records.values())

    def resolve(self, scheme: SchemeSpec, detectors, n: int, alpha: float, B: int, seed: int,
                threads: int = 1) -> dict[str, CriticalRecord]:
        """Look up every detector, calibrating the missing ones in one batch."""
        dets = [make_detector(d) if isinstance(d, str) else d for d in detectors]
        found = {d.label: self.get(scheme, d, n, alpha, B, seed) for d in dets}
        missing = [d for d in dets if found[d.label] is None]
        if missing:
            log.info("calibrating %d detector(s) for %s n=%d alpha=%g B=%d",
                     len(missing), scheme.name, n, alpha, B)
            for rec in mc_criticals(scheme, missing, n, alpha, B, seed, threads).values():
                found[rec.detector] = self.put(rec)
        return found


def _scheme_name(scheme) -> str:
    return scheme.name if isinstance(scheme, SchemeSpec) else SchemeSpec.parse(scheme).name


def _det_label(det) -> str:
    return det.label if isinstance(det, Detector) else make_detector(det).label


def _format_line(r: CriticalRecord) -> str:
    det = make_detector_from_label(r.detector)
    return ",".join([r.scheme, det.name, det.params_text, str(r.n), repr(float(r.alpha)),
                     str(r.B), str(r.seed), f"{r.gamma:.17g}"])


def make_detector_from_label(label: str) -> Detector:
    from .gof import parse_detector
    return parse_detector(label)


def _parse_line(line: str, where: str) -> CriticalRecord:
    fields = line.split(",")
    if len(fields) != 8:
        raise CacheParseError(f"{where}: expected 8 fields, got {len(fields)}")
    scheme, name, params, n, alpha, B, seed, gamma = fields
    try:
        label = name if params in ("", "-") else f"{name}[{params}]"
        det = make_detector_from_label(label)
        rec = CriticalRecord(SchemeSpec.parse(scheme).name, det.label, int(n), float(alpha),
                             int(B), int(seed), float(gamma))
    except ValueError as exc:
        raise CacheParseError(f"{where}: {exc}") from None
    if not math.isfinite(rec.gamma):
        raise CacheParseError(f"{where}: non-finite critical value")
    return rec
