"""Edit attacks applied to watermarked output before detection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .schemes import PivotSeq, SchemeSpec, null_ppf


class EditKind(enum.Enum):
    DELETE = "Del"
    SUBSTITUTE = "Sub"
    INFORICH = "Info"


@dataclass(frozen=True)
class EditSpec:
    kind: EditKind
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.kind, EditKind):
            object.__setattr__(self, "kind", parse_edit_kind(self.kind))
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"edit rate must lie strictly between 0 and 1, got {self.rate}")

    @property
    def label(self) -> str:
        return f"{self.kind.value}@{self.rate:g}"


def parse_edit_kind(text) -> EditKind:
    t = str(text).strip().lower()
    for kind in EditKind:
        if t in (kind.value.lower(), kind.name.lower()):
            return kind
    if t in ("deletion", "delete_tokens"):
        return EditKind.DELETE
    if t in ("substitution", "substitute_tokens"):
        return EditKind.SUBSTITUTE
    if t in ("info-rich", "inforich_edit", "info_rich"):
        return EditKind.INFORICH
    raise ValueError(f"unknown edit kind {text!r}")


def edit_count(rate: float, n: int) -> int:
    """``floor(rate * n)``, robust to representation error (0.3 * 10 is 3, not 2)."""
    return int(math.floor(rate * n + 1e-9))


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _positions(n: int, rate: float, seed: int) -> np.ndarray:
    k = edit_count(rate, n)
    if k < 1:
        raise ValueError(f"rate {rate} edits no token of a length-{n} sequence")
    return np.sort(_rng(seed).choice(n, size=k, replace=False))


def delete_tokens(tokens, rate: float, seed: int) -> np.ndarray:
    """Remove ``floor(rate * n)`` uniformly chosen positions, keeping survivor order."""
    tok = np.asarray(tokens)
    drop = _positions(tok.size, rate, seed)
    if drop.size >= tok.size:
        raise ValueError("deletion would leave an empty sequence")
    keep = np.ones(tok.size, dtype=bool)
    keep[drop] = False
    return tok[keep]


def substitute_tokens(tokens, rate: float, seed: int, V: int) -> np.ndarray:
    """Replace ``floor(rate * n)`` positions by a uniformly chosen different token id."""
    if V < 2:
        raise ValueError("substitution needs at least two tokens")
    tok = np.array(tokens, dtype=np.int64, copy=True)
    pos = _positions(tok.size, rate, seed)
    shift = _rng(seed ^ 0x5B5B).integers(1, V, size=pos.size)
    tok[pos] = (tok[pos] + shift) % V
    return tok


def inforich_indices(y, rate: float) -> np.ndarray:
    """Positions of the ``floor(rate * n)`` largest pivots, earlier position first on ties."""
    y = np.asarray(y, dtype=float)
    k = edit_count(rate, y.size)
    if k < 1:
        raise ValueError(f"rate {rate} edits no pivot of a length-{y.size} sequence")
    return np.argsort(-y, kind="stable")[:k]


def inforich_values(y, rate: float, seed: int, scheme: SchemeSpec) -> np.ndarray:
    """Array form of :func:`inforich_edit`."""
    out = np.array(y, dtype=float, copy=True)
    idx = inforich_indices(out, rate)
    out[idx] = null_ppf(scheme, _rng(seed).random(idx.size))
    return out


def inforich_edit(pivots: PivotSeq, rate: float, seed: int, scheme: SchemeSpec | None = None) -> PivotSeq:
    """Overwrite the largest pivots with fresh draws from the null law."""
    scheme = scheme or pivots.scheme
    vals = inforich_values(pivots.values, rate, seed, scheme)
    return PivotSeq.from_arrays(vals, [p.token for p in pivots.pivots],
                                [p.seed for p in pivots.pivots], scheme,
                                positions=[p.t for p in pivots.pivots])
