"""Goodness-of-fit statistics on p-values ``p_t = 1 - F0(Y_t)``.

Every ``stat_*`` function accepts a 1-D sequence (one stream) or a 2-D array
whose rows are independent streams, and returns a float or a 1-D array
accordingly.  Inputs need not be sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schemes import PivotSeq, SchemeSpec, null_cdf_array

EPS = 1e-12

GOF_NAMES = ("Phi", "Kui", "Kol", "And", "Cra", "Wat", "Ney", "Chi")


class DomainError(ValueError):
    """Raised when a statistic receives p-values it cannot take logs of."""


def to_pvalues(pivots, scheme: SchemeSpec) -> np.ndarray:
    """``1 - F0(y)`` clamped to ``[EPS, 1 - EPS]``; accepts a PivotSeq or raw pivots."""
    y = pivots.values if isinstance(pivots, PivotSeq) else np.asarray(pivots, dtype=float)
    if y.size == 0:
        raise ValueError("need at least one pivot")
    return np.clip(1.0 - null_cdf_array(scheme, y), EPS, 1.0 - EPS)


def _sorted(p):
    a = np.asarray(p, dtype=float)
    if a.shape[-1] == 0:
        raise ValueError("need at least one p-value")
    return np.sort(a, axis=-1)


def _ranks(n):
    return np.arange(1, n + 1, dtype=float)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def stat_kol(p, presorted=False):
    """Kolmogorov-Smirnov ``D_n``."""
    ps = p if presorted else _sorted(p)
    n = ps.shape[-1]
    i = _ranks(n)
    d = np.maximum(ps - (i - 1) / n, i / n - ps)
    return _out(d.max(axis=-1))


def stat_kuiper(p, presorted=False):
    """Kuiper ``V_n``: sum of the two one-sided maxima."""
    ps = p if presorted else _sorted(p)
    n = ps.shape[-1]
    i = _ranks(n)
    return _out((i / n - ps).max(axis=-1) + (ps - (i - 1) / n).max(axis=-1))


def stat_cvm(p, presorted=False):
    """Cramer-von Mises ``W^2``."""
    ps = p if presorted else _sorted(p)
    n = ps.shape[-1]
    mid = (2 * _ranks(n) - 1) / (2 * n)
    return _out(1.0 / (12 * n) + ((ps - mid) ** 2).sum(axis=-1))


def stat_watson(p, presorted=False):
    """Watson ``U^2 = W^2 - n (mean(p) - 1/2)^2``."""
    ps = p if presorted else _sorted(p)
    n = ps.shape[-1]
    w2 = stat_cvm(ps, presorted=True)
    return _out(w2 - n * (ps.mean(axis=-1) - 0.5) ** 2)


def stat_ad(p, presorted=False):
    """Anderson-Darling ``A^2``; p-values must already be clamped away from 0 and 1."""
    ps = p if presorted else _sorted(p)
    if np.any(ps <= 0.0) or np.any(ps >= 1.0):
        raise DomainError("Anderson-Darling needs p-values strictly inside (0, 1); clamp first")
    n = ps.shape[-1]
    w = 2 * _ranks(n) - 1
    terms = np.log(ps) + np.log1p(-ps[..., ::-1])
    return _out(-n - (w * terms).sum(axis=-1) / n)


_LEGENDRE = (
    lambda x: np.sqrt(3.0) * (2 * x - 1),
    lambda x: np.sqrt(5.0) * (6 * x * x - 6 * x + 1),
    lambda x: np.sqrt(7.0) * (20 * x ** 3 - 30 * x * x + 12 * x - 1),
)


def neyman_components(p, k=3):
    """``a_j = mean(h_j(p))`` for the first ``k`` orthonormal shifted Legendre polynomials."""
    if not 1 <= k <= 3:
        raise ValueError("Neyman order k must be 1, 2 or 3")
    x = np.asarray(p, dtype=float)
    return np.stack([_LEGENDRE[j](x).mean(axis=-1) for j in range(k)], axis=-1)


def stat_neyman(p, k=3, presorted=False):
    """Neyman smooth ``T_k = n * sum_j a_j^2``."""
    x = np.asarray(p, dtype=float)
    n = x.shape[-1]
    a = neyman_components(x, k)
    return _out(n * (a ** 2).sum(axis=-1))


def chi2_counts(p, bins=10):
    x = np.asarray(p, dtype=float)
    idx = np.clip(np.floor(x * bins).astype(np.int64), 0, bins - 1)
    if idx.ndim == 1:
        return np.bincount(idx, minlength=bins)
    offs = idx + bins * np.arange(idx.shape[0])[:, None]
    return np.bincount(offs.ravel(), minlength=bins * idx.shape[0]).reshape(idx.shape[0], bins)


def stat_chi2(p, bins=10, presorted=False):
    """Pearson chi-squared over ``bins`` equal-width bins of [0, 1]."""
    if bins < 2:
        raise ValueError("need at least two bins")
    x = np.asarray(p, dtype=float)
    n = x.shape[-1]
    e = n / bins
    return _out(((chi2_counts(x, bins) - e) ** 2).sum(axis=-1) / e)


def phi_s(x, s):
    """The convex generator of the power-divergence family."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if s == 1:
            return x * np.log(x) - x + 1
        if s == 0:
            return -np.log(x) + x - 1
        return (1 - s + s * x - x ** s) / (s * (1 - s))


def k_s(u, v, s):
    """Untruncated divergence ``v phi_s(u/v) + (1-v) phi_s((1-u)/(1-v))``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if s == 2:
        return (u - v) ** 2 / (2 * v * (1 - v))
    return v * phi_s(u / v, s) + (1 - v) * phi_s((1 - u) / (1 - v), s)


def stat_trgof(p, s=2.0, c_plus=None, presorted=False):
    """Truncated phi-divergence statistic ``S_n^+(s)``.

    Evaluated at the order statistics with ``u = i/n`` and ``v = p_(i)``; only
    points with ``p_(i) >= p^+`` and ``0 < v < u < 1`` count, where ``p^+`` is the
    largest p-value not exceeding ``c_plus`` (default ``1/n``).
    """
    ps = p if presorted else _sorted(p)
    n = ps.shape[-1]
    c = 1.0 / n if c_plus is None else c_plus
    u = _ranks(n) / n
    below = np.where(ps <= c, ps, -np.inf)
    p_plus = below.max(axis=-1, keepdims=True)
    ok = (ps >= p_plus) & (ps > 0) & (ps < u) & (u < 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(ok, k_s(u, np.where(ok, ps, 0.5), s), 0.0)
    return _out(np.maximum(vals.max(axis=-1), 0.0))


@dataclass(frozen=True)
class Detector:
    """A named detector with its parameters; GoF tests and sum-based baselines alike."""

    name: str
    params: tuple = field(default=())

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def label(self) -> str:
        """Canonical ``Name`` or ``Name[key=val;...]`` used in files and tables."""
        if not self.params:
            return self.name
        return f"{self.name}[{';'.join(f'{k}={v}' for k, v in self.params)}]"

    @property
    def params_text(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.params) or "-"

    @property
    def is_gof(self) -> bool:
        return self.name in GOF_NAMES

    def __str__(self):
        return self.label


_DEFAULT_PARAMS = {
    "Phi": (("s", 2.0),),
    "Ney": (("k", 3),),
    "Chi": (("bins", 10),),
    "Lst": (("delta", 0.2),),
}


def make_detector(name: str, **params) -> Detector:
    """Build a detector, filling in default parameters (``Phi`` s=2, ``Ney`` k=3, ...)."""
    from .baselines import SCORE_NAMES

    canon = {n.lower(): n for n in GOF_NAMES + SCORE_NAMES}
    key = canon.get(name.lower())
    if key is None:
        raise ValueError(f"unknown detector {name!r}")
    merged = dict(_DEFAULT_PARAMS.get(key, ()))
    merged.update(params)
    if key == "Phi" and merged.get("c") is None:
        merged.pop("c", None)
    return Detector(key, tuple(sorted(merged.items())))


def parse_detector(text: str) -> Detector:
    """Inverse of :attr:`Detector.label`, e.g. ``Chi[bins=20]``."""
    text = text.strip()
    name, _, rest = text.partition("[")
    params = {}
    if rest:
        for item in rest.rstrip("]").split(";"):
            if not item:
                continue
            k, _, v = item.partition("=")
            params[k] = _number(v)
    return make_detector(name, **params)


def _number(v: str):
    try:
        return int(v)
    except ValueError:
        return float(v)


def gof_statistic(det: Detector, p, presorted=False):
    """Evaluate a GoF detector on p-values (1-D or row-wise 2-D)."""
    kw = det.param_dict
    ps = p if presorted else _sorted(p)
    if det.name == "Phi":
        return stat_trgof(ps, s=kw.get("s", 2.0), c_plus=kw.get("c"), presorted=True)
    if det.name == "Kui":
        return stat_kuiper(ps, presorted=True)
    if det.name == "Kol":
        return stat_kol(ps, presorted=True)
    if det.name == "And":
        return stat_ad(ps, presorted=True)
    if det.name == "Cra":
        return stat_cvm(ps, presorted=True)
    if det.name == "Wat":
        return stat_watson(ps, presorted=True)
    if det.name == "Ney":
        return stat_neyman(ps, k=int(kw.get("k", 3)))
    if det.name == "Chi":
        return stat_chi2(ps, bins=int(kw.get("bins", 10)))
    raise ValueError(f"{det.name} is not a goodness-of-fit detector")


def statistic(det: Detector, pivots, scheme: SchemeSpec):
    """Detector statistic from raw pivots (rows = streams), oriented reject-when-large."""
    from .baselines import sum_statistic

    y = pivots.values if isinstance(pivots, PivotSeq) else np.asarray(pivots, dtype=float)
    if det.is_gof:
        return gof_statistic(det, to_pvalues(y, scheme))
    return sum_statistic(y, det, scheme)


@dataclass(frozen=True)
class TestVerdict:
    detector: str
    statistic: float
    gamma: float
    alpha: float
    n: int

    @property
    def reject(self) -> bool:
        return self.statistic > self.gamma


def detect(pivots, detector: Detector, gamma, alpha: float | None = None,
           scheme: SchemeSpec | None = None) -> TestVerdict:
    """Reject H0 when the statistic strictly exceeds the critical value.

    ``gamma`` is either a float or a :class:`~gofmark.calibrate.CriticalRecord`;
    a record's ``n`` and ``alpha`` must match the input.
    """
    from .calibrate import CriticalRecord

    if isinstance(pivots, PivotSeq):
        scheme = scheme or pivots.scheme
        y = pivots.values
    else:
        y = np.asarray(pivots, dtype=float)
    if scheme is None:
        raise ValueError("scheme is required for raw pivot arrays")
    n = y.shape[-1]
    if isinstance(gamma, CriticalRecord):
        if gamma.n != n:
            raise ValueError(f"critical value calibrated for n={gamma.n}, got n={n}")
        if alpha is not None and not np.isclose(alpha, gamma.alpha):
            raise ValueError("alpha does not match the critical value's calibration")
        if gamma.detector != detector.label or gamma.scheme != scheme.name:
            raise ValueError("critical value was calibrated for another detector or scheme")
        alpha, g = gamma.alpha, gamma.gamma
    else:
        g = float(gamma)
    value = float(statistic(detector, y, scheme))
    return TestVerdict(detector.label, value, g, float("nan") if alpha is None else alpha, n)
