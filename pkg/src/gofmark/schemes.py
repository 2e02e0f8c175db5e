"""The three unbiased watermarking schemes: decoders, pivots and null laws.

Scalar functions here are the reference definitions.  Batched generation and
extraction go through :mod:`gofmark._kernels`, which must agree with them
exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from . import _kernels as K
from .prng import GOLDEN, MASK64, mix64, permutation, uniform

PERM_SALT = 0xA5A5A5A5A5A5A5A5


class DegenerateRandomnessError(ValueError):
    """Raised when tournament g-values tie (a probability-zero event)."""


class Kind(enum.Enum):
    GUMBEL = "gumbel"
    INVERSE = "inverse"
    SYNTHID = "synthid"


_KERNEL_CODE = {Kind.GUMBEL: K.GUMBEL, Kind.INVERSE: K.INVERSE, Kind.SYNTHID: K.SYNTHID}


@dataclass(frozen=True)
class SchemeSpec:
    kind: Kind
    k: int = 30

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind(self.kind))
        if self.k < 1:
            raise ValueError("SynthID needs at least one tournament round")

    @classmethod
    def parse(cls, text: str) -> "SchemeSpec":
        """Parse ``gumbel``, ``inverse``, ``synthid`` or ``synthid:k=30``."""
        name, _, rest = text.strip().lower().partition(":")
        k = 30
        if rest:
            key, _, val = rest.partition("=")
            if key != "k":
                raise ValueError(f"unknown scheme parameter {key!r}")
            k = int(val)
        return cls(Kind(name), k)

    @property
    def name(self) -> str:
        if self.kind is Kind.SYNTHID:
            return f"synthid:k={self.k}"
        return self.kind.value

    @property
    def code(self) -> int:
        return _KERNEL_CODE[self.kind]

    def __str__(self):
        return self.name


GUMBEL = SchemeSpec(Kind.GUMBEL)
INVERSE = SchemeSpec(Kind.INVERSE)
SYNTHID = SchemeSpec(Kind.SYNTHID)


@dataclass(frozen=True)
class Pivot:
    y: float
    t: int
    token: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"pivot {self.y} outside [0, 1]")


@dataclass
class PivotSeq:
    pivots: list[Pivot]
    scheme: SchemeSpec = field(default=GUMBEL)

    def __post_init__(self):
        ts = [p.t for p in self.pivots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("pivot positions must be strictly increasing")

    def __len__(self):
        return len(self.pivots)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.y for p in self.pivots], dtype=float)

    @classmethod
    def from_arrays(cls, y, tokens, seeds, scheme, positions=None) -> "PivotSeq":
        n = len(y)
        positions = range(n) if positions is None else positions
        return cls([Pivot(float(a), int(t), int(w), int(s))
                    for a, t, w, s in zip(y, positions, tokens, seeds)], scheme)


def check_ntp(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("NTP distribution must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("NTP probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"NTP probabilities sum to {p.sum()!r}, not 1")
    return p


# --- Gumbel-max -----------------------------------------------------------

def gumbel_decode(probs, seed: int) -> int:
    """argmax over positive-probability tokens of ``log(U_w) / P_w``."""
    p = check_ntp(probs)
    support = np.flatnonzero(p > 0)
    if support.size == 0:
        raise ValueError("NTP distribution has no positive entry")
    u = uniform(np.uint64(seed), support.astype(np.uint64))
    with np.errstate(divide="ignore"):
        scores = np.log(u) / p[support]
    return int(support[np.argmax(scores)])


def gumbel_pivot(token: int, seed: int, t: int = 0) -> Pivot:
    return Pivot(uniform(int(seed), int(token)), t, int(token), int(seed))


def gumbel_alt_cdf(probs, r: float) -> float:
    """CDF of the Gumbel-max pivot when the token was drawn with NTP ``probs``."""
    p = check_ntp(probs)
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    p = p[p > 0]
    return float(np.sum(p * np.power(r, 1.0 / p)))


# --- inverse transform ----------------------------------------------------

def _inverse_randomness(seed: int, V: int):
    u = uniform(int(seed), 0)
    perm = permutation(mix64(int(seed) ^ PERM_SALT), V)
    return u, perm


def inverse_decode(probs, seed: int) -> int:
    """Token whose slot in the permuted cumulative mass contains ``U``."""
    p = check_ntp(probs)
    u, perm = _inverse_randomness(seed, p.size)
    return _inverse_select(p, u, perm)


def _inverse_select(p: np.ndarray, u: float, perm: np.ndarray) -> int:
    order = np.argsort(perm)  # tokens listed by rank
    cum = 0.0
    last = -1
    for w in order:
        if p[w] > 0:
            last = int(w)
            cum += p[w]
            if cum > u:
                return int(w)
    return last


def inverse_pivot(token: int, seed: int, V: int, t: int = 0) -> Pivot:
    if V < 2:
        raise ValueError("inverse-transform pivot needs a vocabulary of at least 2")
    u, perm = _inverse_randomness(seed, V)
    eta = perm[int(token)] / (V - 1.0)
    return Pivot(1.0 - abs(u - eta), t, int(token), int(seed))


# --- SynthID tournament ---------------------------------------------------

def synthid_tournament_step(probs, g) -> np.ndarray:
    """One tournament round: ``P_w * (P_w + 2 * sum_{g_v < g_w} P_v)``."""
    p = np.asarray(probs, dtype=float)
    g = np.asarray(g, dtype=float)
    if p.shape != g.shape:
        raise ValueError("g must have one entry per token")
    order = np.argsort(g, kind="stable")
    gs = g[order]
    if np.any(gs[1:] == gs[:-1]):
        raise DegenerateRandomnessError("tied g-values in tournament step")
    ps = p[order]
    below = np.concatenate(([0.0], np.cumsum(ps)[:-1]))
    out = np.empty_like(p)
    out[order] = ps * (ps + 2.0 * below)
    return out


def synthid_gvalues(seed: int, k: int, V: int) -> np.ndarray:
    """``(k, V)`` array with ``g[i, w] = uniform(seed, i*V + w)``."""
    idx = np.arange(k * V, dtype=np.uint64)
    return uniform(np.uint64(seed), idx).reshape(k, V)


def synthid_decode(probs, seed: int, k: int, fresh: float) -> int:
    p = check_ntp(probs)
    if k < 1:
        raise ValueError("k must be at least 1")
    g = synthid_gvalues(seed, k, p.size)
    for i in range(k):
        p = synthid_tournament_step(p, g[i])
    return _sample_in_id_order(p, fresh)


def _sample_in_id_order(p: np.ndarray, u: float) -> int:
    cum = 0.0
    last = -1
    for w, pw in enumerate(p):
        if pw > 0:
            last = w
            cum += pw
            if cum > u:
                return w
    return last


def synthid_pivot(token: int, seed: int, k: int, V: int, t: int = 0) -> Pivot:
    if k < 1:
        raise ValueError("k must be at least 1")
    total = 0.0
    for i in range(k):
        total += uniform(int(seed), i * V + int(token))
    return Pivot(total / k, t, int(token), int(seed))


# --- null laws --------------------------------------------------------------

_IH_PREC = 256


def irwin_hall_cdf(k: int, x: float) -> float:
    """CDF of the sum of ``k`` uniforms, alternating sum at 256-bit precision."""
    if x <= 0:
        return 0.0
    if x >= k:
        return 1.0
    with mpmath.workprec(_IH_PREC):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for j in range(int(math.floor(x)) + 1):
            term = mpmath.binomial(k, j) * (xm - j) ** k
            total += -term if j % 2 else term
        val = total / mpmath.factorial(k)
    return min(1.0, max(0.0, float(val)))


def irwin_hall_pdf(k: int, x: float) -> float:
    if x <= 0 or x >= k:
        return 0.0
    if k == 1:
        return 1.0
    with mpmath.workprec(_IH_PREC):
        xm = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for j in range(int(math.floor(x)) + 1):
            term = mpmath.binomial(k, j) * (xm - j) ** (k - 1)
            total += -term if j % 2 else term
        val = total / mpmath.factorial(k - 1)
    return max(0.0, float(val))


def null_cdf(scheme: SchemeSpec, r: float) -> float:
    """Exact null CDF of the scheme's pivot at ``r``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    if scheme.kind is Kind.GUMBEL:
        return float(r)
    if scheme.kind is Kind.INVERSE:
        return float(r) * float(r)
    return irwin_hall_cdf(scheme.k, scheme.k * float(r))


_TABLE_SIZE = 4096


@lru_cache(maxsize=None)
def _ih_table(k: int):
    r = np.linspace(0.0, 1.0, _TABLE_SIZE + 1)
    F = np.array([irwin_hall_cdf(k, k * x) for x in r])
    f = np.array([k * irwin_hall_pdf(k, k * x) for x in r])
    F[0], F[-1] = 0.0, 1.0
    return r, F, f


def _hermite(r, F, f, x):
    h = r[1] - r[0]
    j = np.clip(np.floor(x / h).astype(np.int64), 0, len(r) - 2)
    s = (x - r[j]) / h
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * F[j] + h10 * h * f[j] + h01 * F[j + 1] + h11 * h * f[j + 1], j, s


def null_cdf_array(scheme: SchemeSpec, y) -> np.ndarray:
    """Vectorised null CDF.

    SynthID uses cubic Hermite interpolation of an extended-precision table of
    the Irwin-Hall CDF and density (4096 cells; error below 1e-11 for k <= 30).
    """
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    if scheme.kind is Kind.GUMBEL:
        return y.copy()
    if scheme.kind is Kind.INVERSE:
        return y * y
    if scheme.k == 1:
        return y.copy()
    k = scheme.k
    r, F, f = _ih_table(k)
    # the law is symmetric about 1/2; evaluating the lower half only keeps the
    # upper tail free of cancellation, and on [0, 1/k] the CDF is exactly (kx)^k / k!
    z = np.minimum(y, 1.0 - y)
    val, _, _ = _hermite(r, F, f, z)
    val = np.where(z <= 1.0 / k, np.exp(k * np.log(np.maximum(k * z, 1e-300)) - math.lgamma(k + 1)),
                   val)
    val = np.clip(val, 0.0, 0.5)
    return np.where(y > 0.5, 1.0 - val, val)


def null_ppf(scheme: SchemeSpec, u) -> np.ndarray:
    """Inverse of the null CDF, used to draw pivots from the null law."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    if scheme.kind is Kind.GUMBEL or (scheme.kind is Kind.SYNTHID and scheme.k == 1):
        return u.copy()
    if scheme.kind is Kind.INVERSE:
        return np.sqrt(u)
    r, F, f = _ih_table(scheme.k)
    h = r[1] - r[0]
    j = np.clip(np.searchsorted(F, u, side="right") - 1, 0, len(r) - 2)
    dF = F[j + 1] - F[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dF > 0, (u - F[j]) / dF, 0.0)
    x = r[j] + np.clip(s, 0.0, 1.0) * h
    lo, hi = r[j], r[j + 1]
    for _ in range(4):
        val, _, _ = _hermite(r, F, f, x)
        dens = np.interp(x, r, f)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dens > 0, (val - u) / dens, 0.0)
        x = np.clip(x - step, lo, hi)
    return x


def decode(scheme: SchemeSpec, probs, seed: int, fresh: float | None = None) -> int:
    if scheme.kind is Kind.GUMBEL:
        return gumbel_decode(probs, seed)
    if scheme.kind is Kind.INVERSE:
        return inverse_decode(probs, seed)
    if fresh is None:
        raise ValueError("SynthID decoding needs a fresh uniform")
    return synthid_decode(probs, seed, scheme.k, fresh)


def pivot(scheme: SchemeSpec, token: int, seed: int, V: int, t: int = 0) -> Pivot:
    if scheme.kind is Kind.GUMBEL:
        return gumbel_pivot(token, seed, t)
    if scheme.kind is Kind.INVERSE:
        return inverse_pivot(token, seed, V, t)
    return synthid_pivot(token, seed, scheme.k, V, t)


def decode_many(scheme: SchemeSpec, probs, seeds, fresh=None):
    """Decode one distribution under many seeds; returns ``(tokens, pivots)``.

    SynthID's sampling uniforms come from ``fresh`` (one per seed).
    """
    p = np.ascontiguousarray(check_ntp(probs))
    seeds = np.ascontiguousarray(np.asarray(seeds, dtype=np.uint64))
    if scheme.kind is Kind.SYNTHID:
        if fresh is None:
            raise ValueError("SynthID decoding needs a fresh uniform per seed")
        fresh = np.ascontiguousarray(np.asarray(fresh, dtype=float))
        if fresh.shape != seeds.shape:
            raise ValueError("need one fresh uniform per seed")
    else:
        fresh = np.zeros(seeds.shape)
    tokens = np.empty(seeds.shape, dtype=np.int64)
    pivots = np.empty(seeds.shape)
    try:
        K.decode_many(scheme.code, scheme.k, p, seeds, fresh, tokens, pivots)
    except ValueError as exc:
        raise DegenerateRandomnessError(str(exc)) from None
    return tokens, pivots


def pivot_many(scheme: SchemeSpec, tokens, seeds, V: int) -> np.ndarray:
    """Vectorised pivots for paired ``tokens`` and ``seeds``."""
    tok = np.ascontiguousarray(np.asarray(tokens, dtype=np.int64))
    seeds = np.ascontiguousarray(np.asarray(seeds, dtype=np.uint64))
    if tok.shape != seeds.shape:
        raise ValueError("tokens and seeds must have the same shape")
    if scheme.kind is Kind.INVERSE and V < 2:
        raise ValueError("inverse-transform pivots need V >= 2")
    if np.any(tok < 0) or np.any(tok >= V):
        raise ValueError("token id outside the vocabulary")
    out = np.empty(tok.shape)
    K.pivot_many(scheme.code, scheme.k, int(V), tok, seeds, out)
    return out


__all__ = [
    "DegenerateRandomnessError", "Kind", "SchemeSpec", "GUMBEL", "INVERSE", "SYNTHID",
    "Pivot", "PivotSeq", "gumbel_decode", "gumbel_pivot", "gumbel_alt_cdf",
    "inverse_decode", "inverse_pivot", "synthid_tournament_step", "synthid_decode",
    "synthid_pivot", "irwin_hall_cdf", "null_cdf", "null_cdf_array", "null_ppf",
    "decode", "pivot", "decode_many", "pivot_many", "GOLDEN", "MASK64",
]
