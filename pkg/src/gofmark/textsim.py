"""Synthetic autoregressive language model standing in for a real LLM.

Next-token logits are a Zipf baseline plus a Gaussian perturbation hashed from
the last ``m`` tokens, so a repeated context always reproduces its distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .prng import PAD_TOKEN, _as_key, mix64
from .schemes import GUMBEL, Kind, PivotSeq, SchemeSpec

#: Salt separating SynthID's fresh sampling stream from everything else.
FRESH_SALT = 0x5EED5EED5EED5EED
PLAIN_SALT = 0x9A1A9A1A9A1A9A1A


@dataclass(frozen=True)
class SimModel:
    V: int = 1000
    beta: float = 1.0
    sigma: float = 2.0
    m: int = 4
    seed: int = 20240601

    def __post_init__(self):
        if self.V < 2:
            raise ValueError("vocabulary needs at least two tokens")
        if self.beta < 0 or self.sigma < 0:
            raise ValueError("beta and sigma must be non-negative")
        if self.m < 1:
            raise ValueError("context window m must be at least 1")

    @property
    def key_bytes(self) -> np.ndarray:
        return np.frombuffer(int(self.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"), dtype=np.uint8)


@dataclass
class GenRecord:
    tokens: np.ndarray
    pivots: PivotSeq
    top_probs: np.ndarray
    T: float
    scheme: SchemeSpec = field(default=GUMBEL)

    def __post_init__(self):
        if not (len(self.tokens) == len(self.pivots) == len(self.top_probs)):
            raise ValueError("tokens, pivots and top probabilities must share one length")

    def to_csv(self, path):
        """Write columns ``t, token, pivot, pvalue, top_prob`` (one row per position)."""
        from .gof import to_pvalues

        y = self.pivots.values
        pv = to_pvalues(y, self.scheme)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "token", "pivot", "pvalue", "top_prob"])
            for t in range(len(y)):
                w.writerow([t, int(self.tokens[t]), repr(float(y[t])), repr(float(pv[t])),
                            repr(float(self.top_probs[t]))])


def _key_matrix(keys, rows: int) -> np.ndarray:
    if isinstance(keys, (bytes, bytearray, str)):
        keys = [keys] * rows
    ks = [_as_key(k) for k in keys]
    if len(ks) != rows:
        raise ValueError("need one key per row")
    if len({len(k) for k in ks}) > 1:
        raise ValueError("keys in one batch must share a length")
    return np.frombuffer(b"".join(ks), dtype=np.uint8).reshape(rows, len(ks[0])).copy()


def _check_T(T: float):
    if not T > 0:
        raise ValueError("temperature must be positive")


def ntp(model: SimModel, context, T: float) -> np.ndarray:
    """Next-token distribution after ``context`` (its last ``m`` ids; PAD-filled if short)."""
    _check_T(T)
    ctx = [int(t) for t in context][-model.m:]
    ctx = [PAD_TOKEN] * (model.m - len(ctx)) + ctx
    out = np.empty((1, model.V))
    K.ntp_batch(model.key_bytes, float(model.beta), float(model.sigma), model.m, float(T),
                np.array([ctx], dtype=np.int64), out)
    return out[0]


def ntp_batch(model: SimModel, contexts, T: float):
    """Distributions and top probabilities for each row of an ``(R, m)`` context array."""
    _check_T(T)
    ctx = np.ascontiguousarray(np.asarray(contexts, dtype=np.int64))
    if ctx.ndim != 2 or ctx.shape[1] != model.m:
        raise ValueError(f"contexts must have shape (R, {model.m})")
    out = np.empty((ctx.shape[0], model.V))
    tops = K.ntp_batch(model.key_bytes, float(model.beta), float(model.sigma), model.m, float(T),
                       ctx, out)
    return out, tops


def fresh_seed(model: SimModel, nonce: int = 0) -> int:
    return mix64((model.seed ^ FRESH_SALT ^ mix64(nonce)) & 0xFFFFFFFFFFFFFFFF)


def generate_watermarked_batch(model: SimModel, scheme: SchemeSpec, keys, n: int, T: float,
                               nonces=None):
    """Watermarked generation for many runs at once.

    Returns ``(tokens, pivots, top_probs)``, each of shape ``(R, n)``.  Row ``r``
    is exactly what :func:`generate_watermarked` returns for ``keys[r]``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_T(T)
    rows = len(keys) if not isinstance(keys, (bytes, bytearray, str)) else 1
    kmat = _key_matrix(keys, rows)
    nonces = np.zeros(rows, dtype=np.int64) if nonces is None else np.asarray(nonces)
    fresh = np.array([fresh_seed(model, int(x)) for x in nonces], dtype=np.uint64)
    tokens = np.zeros((rows, n), dtype=np.int64)
    pivots = np.zeros((rows, n))
    tops = np.zeros((rows, n))
    K.generate_batch(scheme.code, scheme.k, model.key_bytes, float(model.beta), float(model.sigma),
                     model.m, model.V, float(T), kmat, fresh, n, tokens, pivots, tops)
    return tokens, pivots, tops


def generate_watermarked(model: SimModel, scheme: SchemeSpec, key, n: int, T: float,
                         nonce: int = 0) -> GenRecord:
    """Generate ``n`` watermarked tokens from the PAD-filled start context.

    SynthID's extra sampling uniform at step ``t`` is ``uniform(fresh_seed(model, nonce), t)``.
    """
    tokens, y, tops = generate_watermarked_batch(model, scheme, [key], n, T, [nonce])
    seeds = _context_seeds(tokens[0], key, model.m)
    return GenRecord(tokens[0], PivotSeq.from_arrays(y[0], tokens[0], seeds, scheme), tops[0],
                     T, scheme)


def plain_stream_seed(rng_seed: int) -> int:
    return mix64((int(rng_seed) ^ PLAIN_SALT) & 0xFFFFFFFFFFFFFFFF)


def generate_plain_batch(model: SimModel, n: int, T: float, rng_seeds):
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_T(T)
    seeds = np.array([plain_stream_seed(int(s)) for s in rng_seeds], dtype=np.uint64)
    tokens = np.zeros((len(seeds), n), dtype=np.int64)
    tops = np.zeros((len(seeds), n))
    K.plain_batch(model.key_bytes, float(model.beta), float(model.sigma), model.m, model.V,
                  float(T), seeds, n, tokens, tops)
    return tokens, tops


def generate_plain(model: SimModel, n: int, T: float, rng_seed: int) -> np.ndarray:
    """Unwatermarked text: inverse-CDF sampling with a key-independent stream."""
    return generate_plain_batch(model, n, T, [rng_seed])[0][0]


def _context_seeds(tokens, key, m) -> np.ndarray:
    tok = np.asarray(tokens, dtype=np.int64)
    kmat = _key_matrix([key], 1)
    seeds = np.zeros((1, tok.size), dtype=np.uint64)
    K.seeds_batch(m, kmat, tok[None, :], np.array([tok.size]), seeds)
    return seeds[0]


def extract_batch(tokens, keys, scheme: SchemeSpec, m: int, V: int, lengths=None):
    """Detector-side pivots and seeds for each row of a (possibly ragged) token matrix."""
    tok = np.ascontiguousarray(np.asarray(tokens, dtype=np.int64))
    if tok.ndim != 2:
        raise ValueError("tokens must be a 2-D array")
    R, n = tok.shape
    lengths = np.full(R, n, dtype=np.int64) if lengths is None else np.asarray(lengths, dtype=np.int64)
    mask = np.arange(n)[None, :] < lengths[:, None]
    if np.any((tok < 0) & mask) or np.any((tok >= V) & mask):
        raise ValueError("token id outside the vocabulary")
    kmat = _key_matrix(keys, R)
    piv = np.zeros((R, n))
    seeds = np.zeros((R, n), dtype=np.uint64)
    K.extract_batch(scheme.code, scheme.k, m, V, kmat, tok, lengths, piv, seeds)
    return piv, seeds


def extract_pivots(tokens, key, scheme: SchemeSpec, m: int, V: int) -> PivotSeq:
    """Recompute every pivot from observed text and the secret key."""
    tok = np.asarray(tokens, dtype=np.int64)
    if tok.size < 1:
        raise ValueError("need at least one token")
    if scheme.kind is Kind.INVERSE and V < 2:
        raise ValueError("inverse-transform pivots need V >= 2")
    piv, seeds = extract_batch(tok[None, :], [key], scheme, m, V)
    return PivotSeq.from_arrays(piv[0], tok, seeds[0], scheme)


def repetition_rate(tokens, m: int) -> float:
    """Fraction of positions ``t > m`` whose preceding m-gram already occurred earlier."""
    tok = [int(t) for t in tokens]
    n = len(tok)
    if n <= m:
        raise ValueError("sequence must be longer than m")
    seen = set()
    repeats = 0
    for t in range(m, n):
        gram = tuple(tok[t - m:t])
        if gram in seen:
            repeats += 1
        else:
            seen.add(gram)
    return repeats / (n - m)


def dedupe_mask(tokens, seeds) -> np.ndarray:
    """True at the first occurrence of each (seed, token) pair."""
    keep = np.zeros(len(tokens), dtype=bool)
    seen = set()
    for i, pair in enumerate(zip(np.asarray(seeds).tolist(), np.asarray(tokens).tolist())):
        if pair not in seen:
            seen.add(pair)
            keep[i] = True
    return keep


def dedupe_pivots(pivots: PivotSeq) -> PivotSeq:
    """Drop pivots whose (seed, token) pair already appeared earlier in the sequence."""
    seen = set()
    kept = []
    for p in pivots.pivots:
        pair = (p.seed, p.token)
        if pair not in seen:
            seen.add(pair)
            kept.append(p)
    return PivotSeq(kept, pivots.scheme)


def save_record_csv(record: GenRecord, path) -> Path:
    path = Path(path)
    record.to_csv(path)
    return path
