"""Compiled per-row kernels for generation and pivot extraction.

Each row of a batch is processed with explicit scalar loops, so a row's result
never depends on how many other rows share the batch or which thread runs it.
The pure-Python functions in :mod:`gofmark.prng` and :mod:`gofmark.schemes`
are the reference definitions; tests check these kernels against them bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

GOLDEN = uint64(0x9E3779B97F4A7C15)
M1 = uint64(0xBF58476D1CE4E5B9)
M2 = uint64(0x94D049BB133111EB)
PERM_SALT = uint64(0xA5A5A5A5A5A5A5A5)
PAD = 0xFFFFFFFF
INV53 = 1.0 / 9007199254740992.0

GUMBEL = 0
INVERSE = 1
SYNTHID = 2


@njit(cache=True, nogil=True)
def mix64(x):
    z = x + GOLDEN
    z = (z ^ (z >> uint64(30))) * M1
    z = (z ^ (z >> uint64(27))) * M2
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True)
def uniform(seed, index):
    z = mix64(seed ^ ((uint64(index) + uint64(1)) * GOLDEN))
    return float(z >> uint64(11)) * INV53


@njit(cache=True, nogil=True)
def gaussian(seed, index):
    u1 = uniform(seed, uint64(2) * uint64(index))
    u2 = uniform(seed, uint64(2) * uint64(index) + uint64(1))
    if u1 <= 0.0:
        u1 = INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True, nogil=True)
def hash_context(key, tokens, end, m):
    """derive_seed(key, tokens[end-m:end]) with PAD for negative positions."""
    klen = key.shape[0]
    total = klen + 4 * m
    nblocks = (total + 7) // 8
    state = uint64(0)
    for b in range(nblocks):
        block = uint64(0)
        for j in range(8):
            pos = 8 * b + j
            if pos >= total:
                byte = 0
            elif pos < klen:
                byte = key[pos]
            else:
                q = pos - klen
                t = end - m + q // 4
                tok = PAD if t < 0 else tokens[t]
                byte = (tok >> (8 * (q % 4))) & 0xFF
            block |= uint64(byte) << uint64(8 * j)
        state = mix64(state ^ block)
    return state


@njit(cache=True, nogil=True)
def ntp_row(model_key, beta, sigma, T, tokens, end, m, probs):
    """Fill ``probs`` with the simulator's next-token distribution; return its max."""
    V = probs.shape[0]
    seed = hash_context(model_key, tokens, end, m)
    mx = -np.inf
    for w in range(V):
        lg = (-beta * np.log1p(float(w)) + sigma * gaussian(seed, w)) / T
        probs[w] = lg
        if lg > mx:
            mx = lg
    total = 0.0
    for w in range(V):
        e = np.exp(probs[w] - mx)
        probs[w] = e
        total += e
    top = 0.0
    for w in range(V):
        probs[w] /= total
        if probs[w] > top:
            top = probs[w]
    return top


@njit(cache=True, nogil=True)
def gumbel_decode(probs, seed):
    best = -1
    best_score = -np.inf
    for w in range(probs.shape[0]):
        p = probs[w]
        if p > 0.0:
            u = uniform(seed, w)
            if u <= 0.0:
                score = -np.inf
            else:
                score = np.log(u) / p
            if best < 0 or score > best_score:
                best = w
                best_score = score
    return best


@njit(cache=True, nogil=True)
def fill_permutation(seed, perm):
    V = perm.shape[0]
    for i in range(V):
        perm[i] = i
    for k in range(V - 1):
        i = V - 1 - k
        span = i + 1
        j = int(uniform(seed, k) * span)
        if j > i:
            j = i
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp


@njit(cache=True, nogil=True)
def inverse_decode(probs, seed, perm, order):
    """Inverse-transform decoder; ``perm``/``order`` are scratch buffers of length V."""
    V = probs.shape[0]
    u = uniform(seed, 0)
    fill_permutation(mix64(seed ^ PERM_SALT), perm)
    for w in range(V):
        order[perm[w]] = w
    cum = 0.0
    last_pos = -1
    for r in range(V):
        w = order[r]
        p = probs[w]
        if p > 0.0:
            last_pos = w
            cum += p
            if cum > u:
                return w
    return last_pos


@njit(cache=True, nogil=True)
def inverse_pivot(w, seed, perm):
    V = perm.shape[0]
    u = uniform(seed, 0)
    fill_permutation(mix64(seed ^ PERM_SALT), perm)
    eta = perm[w] / (V - 1.0)
    return 1.0 - abs(u - eta)


@njit(cache=True, nogil=True)
def _sort_by_key(keys, idx, counts, starts, out):
    """Bucket sort of ``keys`` in [0,1) into ``out`` (indices ascending by key)."""
    V = keys.shape[0]
    for b in range(V):
        counts[b] = 0
    for w in range(V):
        b = int(keys[w] * V)
        if b >= V:
            b = V - 1
        idx[w] = b
        counts[b] += 1
    starts[0] = 0
    for b in range(V):
        starts[b + 1] = starts[b] + counts[b]
    for b in range(V):
        counts[b] = starts[b]
    for w in range(V):
        b = idx[w]
        out[counts[b]] = w
        counts[b] += 1
    # insertion sort inside each bucket (expected O(1) size)
    for b in range(V):
        lo = starts[b]
        hi = starts[b + 1]
        for a in range(lo + 1, hi):
            cur = out[a]
            kc = keys[cur]
            c = a - 1
            while c >= lo and keys[out[c]] > kc:
                out[c + 1] = out[c]
                c -= 1
            out[c + 1] = cur


@njit(cache=True, nogil=True)
def tournament_step(probs, g, idx, counts, starts, order):
    """In-place T_g(P): P_w * (P_w + 2 * sum of P over tokens with smaller g)."""
    V = probs.shape[0]
    _sort_by_key(g, idx, counts, starts, order)
    below = 0.0
    prev = -1.0
    for r in range(V):
        w = order[r]
        if g[w] == prev:
            raise ValueError("tied g-values in tournament step")
        prev = g[w]
        p = probs[w]
        probs[w] = p * (p + 2.0 * below)
        below += p


@njit(cache=True, nogil=True)
def synthid_decode(probs, seed, k, fresh, g, idx, counts, starts, order):
    V = probs.shape[0]
    for i in range(k):
        for w in range(V):
            g[w] = uniform(seed, i * V + w)
        tournament_step(probs, g, idx, counts, starts, order)
    cum = 0.0
    last = -1
    for w in range(V):
        p = probs[w]
        if p > 0.0:
            last = w
            cum += p
            if cum > fresh:
                return w
    return last


@njit(cache=True, nogil=True)
def synthid_pivot(w, seed, k, V):
    total = 0.0
    for i in range(k):
        total += uniform(seed, i * V + w)
    return total / k


@njit(cache=True, nogil=True)
def sample_row(probs, u):
    cum = 0.0
    last = -1
    for w in range(probs.shape[0]):
        p = probs[w]
        if p > 0.0:
            last = w
            cum += p
            if cum > u:
                return w
    return last


@njit(cache=True, nogil=True)
def generate_batch(kind, k, model_key, beta, sigma, m, V, T, keys, fresh_seeds, n,
                   tokens, pivots, top_probs):
    """Watermarked autoregressive generation for every row of ``keys``."""
    R = keys.shape[0]
    probs = np.empty(V)
    perm = np.empty(V, dtype=np.int64)
    order = np.empty(V, dtype=np.int64)
    idx = np.empty(V, dtype=np.int64)
    counts = np.empty(V + 1, dtype=np.int64)
    starts = np.empty(V + 1, dtype=np.int64)
    g = np.empty(V)
    for r in range(R):
        row = tokens[r]
        key = keys[r]
        for t in range(n):
            top_probs[r, t] = ntp_row(model_key, beta, sigma, T, row, t, m, probs)
            seed = hash_context(key, row, t, m)
            if kind == GUMBEL:
                w = gumbel_decode(probs, seed)
                y = uniform(seed, w)
            elif kind == INVERSE:
                w = inverse_decode(probs, seed, perm, order)
                y = inverse_pivot(w, seed, perm)
            else:
                fresh = uniform(fresh_seeds[r], t)
                w = synthid_decode(probs, seed, k, fresh, g, idx, counts, starts, order)
                y = synthid_pivot(w, seed, k, V)
            row[t] = w
            pivots[r, t] = y


@njit(cache=True, nogil=True)
def plain_batch(model_key, beta, sigma, m, V, T, stream_seeds, n, tokens, top_probs):
    R = stream_seeds.shape[0]
    probs = np.empty(V)
    for r in range(R):
        row = tokens[r]
        s = stream_seeds[r]
        for t in range(n):
            top_probs[r, t] = ntp_row(model_key, beta, sigma, T, row, t, m, probs)
            row[t] = sample_row(probs, uniform(s, t))


@njit(cache=True, nogil=True)
def extract_batch(kind, k, m, V, keys, tokens, lengths, pivots, seeds):
    """Recompute seeds and pivots from observed tokens (rows may be ragged)."""
    R = tokens.shape[0]
    perm = np.empty(V, dtype=np.int64)
    for r in range(R):
        row = tokens[r]
        key = keys[r]
        for t in range(lengths[r]):
            seed = hash_context(key, row, t, m)
            seeds[r, t] = seed
            w = row[t]
            if kind == GUMBEL:
                pivots[r, t] = uniform(seed, w)
            elif kind == INVERSE:
                pivots[r, t] = inverse_pivot(w, seed, perm)
            else:
                pivots[r, t] = synthid_pivot(w, seed, k, V)


@njit(cache=True, nogil=True)
def ntp_batch(model_key, beta, sigma, m, T, contexts, out):
    tops = np.empty(contexts.shape[0])
    for r in range(contexts.shape[0]):
        tops[r] = ntp_row(model_key, beta, sigma, T, contexts[r], m, m, out[r])
    return tops


@njit(cache=True, nogil=True)
def seeds_batch(m, keys, tokens, lengths, seeds):
    for r in range(tokens.shape[0]):
        for t in range(lengths[r]):
            seeds[r, t] = hash_context(keys[r], tokens[r], t, m)


@njit(cache=True, nogil=True)
def decode_many(kind, k, probs, seeds, fresh, tokens, pivots):
    """Decode one fixed NTP distribution under many seeds."""
    V = probs.shape[0]
    work = np.empty(V)
    perm = np.empty(V, dtype=np.int64)
    order = np.empty(V, dtype=np.int64)
    idx = np.empty(V, dtype=np.int64)
    counts = np.empty(V + 1, dtype=np.int64)
    starts = np.empty(V + 1, dtype=np.int64)
    g = np.empty(V)
    for r in range(seeds.shape[0]):
        seed = seeds[r]
        if kind == GUMBEL:
            w = gumbel_decode(probs, seed)
            y = uniform(seed, w)
        elif kind == INVERSE:
            w = inverse_decode(probs, seed, perm, order)
            y = inverse_pivot(w, seed, perm)
        else:
            for j in range(V):
                work[j] = probs[j]
            w = synthid_decode(work, seed, k, fresh[r], g, idx, counts, starts, order)
            y = synthid_pivot(w, seed, k, V)
        tokens[r] = w
        pivots[r] = y


@njit(cache=True, nogil=True)
def pivot_many(kind, k, V, tokens, seeds, out):
    perm = np.empty(V, dtype=np.int64)
    for r in range(seeds.shape[0]):
        w = tokens[r]
        seed = seeds[r]
        if kind == GUMBEL:
            out[r] = uniform(seed, w)
        elif kind == INVERSE:
            out[r] = inverse_pivot(w, seed, perm)
        else:
            out[r] = synthid_pivot(w, seed, k, V)
