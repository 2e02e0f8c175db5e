"""Sum-based detection rules ``T_n = sum_t h(Y_t)``."""

from __future__ import annotations

import numpy as np

from .schemes import Kind, PivotSeq, SchemeSpec

SCORE_NAMES = ("Ars", "Log", "Neg", "Sum", "Lst")

#: Baselines that apply to each scheme by default.
SCHEME_BASELINES = {
    Kind.GUMBEL: ("Ars", "Log", "Lst"),
    Kind.INVERSE: ("Neg",),
    Kind.SYNTHID: ("Sum",),
}

EPS = 1e-12


class UnsupportedSchemeError(ValueError):
    pass


def _delta(det) -> float:
    d = float(dict(det.params).get("delta", 0.2)) if hasattr(det, "params") else 0.2
    if not 0.0 < d < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return d


def score(det, y, scheme: SchemeSpec | None = None):
    """Per-pivot score ``h(y)`` for a baseline detector (name or Detector)."""
    from .gof import make_detector

    if isinstance(det, str):
        det = make_detector(det)
    name = det.name
    y = np.asarray(y, dtype=float)
    if name == "Ars":
        return -np.log1p(-np.clip(y, EPS, 1 - EPS))
    if name == "Log":
        return np.log(np.clip(y, EPS, 1 - EPS))
    if name == "Neg":
        return -y
    if name == "Sum":
        return y.copy() if y.ndim else float(y)
    if name == "Lst":
        if scheme is not None and scheme.kind is not Kind.GUMBEL:
            raise UnsupportedSchemeError("Lst is only available for the Gumbel-max scheme")
        d = _delta(det)
        return y ** (d / (1 - d)) + y ** ((1 - d) / d)
    raise ValueError(f"{name} is not a sum-based baseline")


def orientation(name: str) -> int:
    """+1 if watermarking raises the score, -1 if it lowers it (pivots grow under H1)."""
    return -1 if name == "Neg" else 1


def sum_statistic(pivots, det, scheme: SchemeSpec | None = None):
    """Oriented sum of scores; rows of a 2-D input are separate streams."""
    from .gof import make_detector

    if isinstance(det, str):
        det = make_detector(det)
    y = pivots.values if isinstance(pivots, PivotSeq) else np.asarray(pivots, dtype=float)
    if y.shape[-1] == 0:
        raise ValueError("need at least one pivot")
    total = np.asarray(score(det, y, scheme)).sum(axis=-1) * orientation(det.name)
    return float(total) if np.ndim(total) == 0 else total
