from fractions import Fraction
from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gofmark.prng import mix64, permutation, uniform
from gofmark.schemes import (GUMBEL, INVERSE, SYNTHID, DegenerateRandomnessError, Kind,
                             PivotSeq, SchemeSpec, check_ntp, decode, decode_many,
                             gumbel_alt_cdf, gumbel_decode, gumbel_pivot, inverse_decode,
                             inverse_pivot, irwin_hall_cdf, null_cdf, null_cdf_array, null_ppf,
                             pivot_many, synthid_decode, synthid_gvalues, synthid_pivot,
                             synthid_tournament_step, _inverse_select, _sample_in_id_order)

SEEDS = mix64(np.arange(100_000, dtype=np.uint64))


def find_seed(pred, start=0):
    s = start
    while not pred(s):
        s += 1
    return s


def test_scheme_parse_and_names():
    assert SchemeSpec.parse("gumbel") == GUMBEL
    assert SchemeSpec.parse("SynthID:k=5") == SchemeSpec(Kind.SYNTHID, 5)
    assert SYNTHID.name == "synthid:k=30"
    with pytest.raises(ValueError):
        SchemeSpec(Kind.SYNTHID, 0)
    with pytest.raises(ValueError):
        SchemeSpec.parse("greenred")


def test_check_ntp_rejects_bad_vectors():
    for bad in ([], [0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0]):
        with pytest.raises(ValueError):
            check_ntp(bad)


# --- Gumbel-max --------------------------------------------------------------

def test_gumbel_degenerate_and_hand_example():
    assert gumbel_decode([1.0, 0.0], 123) == 0
    # the worked example U = (0.9, 0.1): find a seed whose first two uniforms order the same way
    s = find_seed(lambda s: uniform(s, 0) > 0.5 > uniform(s, 1))
    assert gumbel_decode([0.5, 0.5], s) == 0
    assert np.log(0.9) / 0.5 == pytest.approx(-0.2107, abs=1e-4)
    assert np.log(0.1) / 0.5 == pytest.approx(-4.6052, abs=1e-4)


def test_gumbel_all_zero_rejected():
    with pytest.raises(ValueError):
        gumbel_decode([0.0, 0.0], 1)


def test_gumbel_pivot_is_uniform_at_token():
    p = gumbel_pivot(17, 99)
    assert p.y == uniform(99, 17) and p.token == 17


def test_gumbel_frequencies_and_pivot_dominance():
    P = np.array([0.2, 0.3, 0.5])
    tok, y = decode_many(GUMBEL, P, SEEDS)
    assert np.all(np.abs(np.bincount(tok, minlength=3) / tok.size - P) < 0.01)
    _, y2 = decode_many(GUMBEL, [0.5, 0.5], SEEDS)
    assert (y2.mean() - 0.5) / (np.sqrt(1 / 12) / np.sqrt(y2.size)) > 5


def test_gumbel_alt_cdf_values():
    assert gumbel_alt_cdf([1.0], 0.37) == pytest.approx(0.37)
    assert gumbel_alt_cdf([0.5, 0.5], 0.5) == pytest.approx(0.25)
    assert gumbel_alt_cdf([0.3, 0.7], 0.0) == 0.0
    assert gumbel_alt_cdf([0.3, 0.7], 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gumbel_alt_cdf([1.0], 1.5)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_gumbel_alt_cdf_monotone_and_below_null(w):
    P = np.array(w) / np.sum(w)
    r = np.linspace(0, 1, 51)
    F = np.array([gumbel_alt_cdf(P, x) for x in r])
    assert np.all(np.diff(F) >= -1e-12)
    # the alternative pivot is stochastically larger: its CDF sits below the diagonal
    assert gumbel_alt_cdf(P, 0.5) < 0.5


# --- inverse transform -------------------------------------------------------

def test_inverse_hand_example():
    # identity permutation: cumulative mass 0.2, 0.5, 1.0 brackets U = 0.4 at token 1
    assert _inverse_select(np.array([0.2, 0.3, 0.5]), 0.4, np.arange(3)) == 1
    assert _inverse_select(np.array([0.2, 0.3, 0.5]), 0.1, np.arange(3)) == 0
    assert _inverse_select(np.array([0.2, 0.3, 0.5]), 0.95, np.array([2, 0, 1])) == 0


def test_inverse_degenerate_and_pivot_values():
    for s in range(20):
        assert inverse_decode([0.0, 1.0, 0.0], s) == 1
    s = 77
    u = uniform(s, 0)
    perm = permutation(mix64(s ^ 0xA5A5A5A5A5A5A5A5), 11)
    for w in range(11):
        assert inverse_pivot(w, s, 11).y == pytest.approx(1 - abs(u - perm[w] / 10))
    with pytest.raises(ValueError):
        inverse_pivot(0, 1, 1)


def test_inverse_frequencies():
    P = np.array([0.2, 0.3, 0.5])
    tok, _ = decode_many(INVERSE, P, SEEDS)
    assert np.all(np.abs(np.bincount(tok, minlength=3) / tok.size - P) < 0.01)


# --- SynthID -------------------------------------------------------------------

def test_tournament_hand_example():
    out = synthid_tournament_step([0.5, 0.5], [0.1, 0.7])
    assert out.tolist() == [0.25, 0.75]
    with pytest.raises(DegenerateRandomnessError):
        synthid_tournament_step([0.5, 0.5], [0.3, 0.3])
    assert synthid_tournament_step([0, 1.0, 0], [0.4, 0.2, 0.9]).tolist() == [0, 1.0, 0]


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=20), st.integers(0, 2 ** 64 - 1))
def test_tournament_preserves_mass(w, seed):
    if sum(w) == 0:
        w = [1.0] + w[1:]
    P = np.array(w) / np.sum(w)
    g = uniform(np.uint64(seed), np.arange(P.size, dtype=np.uint64))
    out = synthid_tournament_step(P, g)
    assert out.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(out >= 0)


def test_synthid_decode_hand_example():
    # k = 1, g0 < g1, fresh 0.5 -> modified (0.25, 0.75) -> token 1
    s = find_seed(lambda s: uniform(s, 0) < uniform(s, 1))
    assert synthid_decode([0.5, 0.5], s, 1, 0.5) == 1
    assert synthid_decode([0.5, 0.5], s, 1, 0.2) == 0
    assert _sample_in_id_order(np.array([0.25, 0.75]), 0.5) == 1


def test_synthid_pivot_mean_of_g():
    g = synthid_gvalues(5, 2, 10)
    assert synthid_pivot(3, 5, 2, 10).y == pytest.approx((g[0, 3] + g[1, 3]) / 2)
    assert synthid_pivot(3, 5, 1, 10).y == g[0, 3]


def test_synthid_frequencies_k3():
    P = np.array([0.2, 0.3, 0.5])
    fresh = np.random.default_rng(0).random(SEEDS.size)
    tok, _ = decode_many(SchemeSpec(Kind.SYNTHID, 3), P, SEEDS, fresh)
    assert np.all(np.abs(np.bincount(tok, minlength=3) / tok.size - P) < 0.01)


def test_kernel_decoders_match_reference():
    rng = np.random.default_rng(4)
    P = rng.dirichlet(np.ones(40))
    seeds = SEEDS[:200]
    fresh = rng.random(200)
    for scheme in (GUMBEL, INVERSE, SchemeSpec(Kind.SYNTHID, 4)):
        tok, y = decode_many(scheme, P, seeds, fresh)
        for j in range(0, 200, 13):
            w = decode(scheme, P, int(seeds[j]), fresh[j])
            assert w == tok[j]
        assert np.array_equal(pivot_many(scheme, tok, seeds, 40), y)


# --- null laws -----------------------------------------------------------------

def exact_ih(k, x):
    x = Fraction(x)
    total = sum((-1) ** j * comb(k, j) * (x - j) ** k for j in range(int(x) + 1))
    return float(total / factorial(k))


@pytest.mark.parametrize("k,x", [(2, 0.5), (5, 1.3), (12, 6.0), (30, 15.0), (30, 7.25),
                                 (30, 22.5), (30, 2.0), (40, 31.1)])
def test_irwin_hall_against_exact_rationals(k, x):
    assert irwin_hall_cdf(k, x) == pytest.approx(exact_ih(k, Fraction(x).limit_denominator(1000)),
                                                abs=1e-15)


def test_null_cdf_examples():
    assert null_cdf(GUMBEL, 0.3) == 0.3
    assert null_cdf(INVERSE, 0.5) == 0.25
    assert null_cdf(SchemeSpec(Kind.SYNTHID, 2), 0.25) == pytest.approx(0.125)
    assert null_cdf(SYNTHID, 0.5) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        null_cdf(GUMBEL, 1.2)


@pytest.mark.parametrize("scheme", [GUMBEL, INVERSE, SYNTHID, SchemeSpec(Kind.SYNTHID, 3)])
def test_null_cdf_monotone_with_endpoints(scheme):
    r = np.linspace(0, 1, 10_001)
    F = null_cdf_array(scheme, r)
    assert np.all(np.diff(F) >= 0)
    assert F[0] == pytest.approx(0, abs=1e-9) and F[-1] == pytest.approx(1, abs=1e-9)


def test_vectorised_synthid_cdf_and_ppf_accuracy():
    r = np.random.default_rng(0).random(300)
    exact = np.array([null_cdf(SYNTHID, x) for x in r])
    assert np.max(np.abs(null_cdf_array(SYNTHID, r) - exact)) < 1e-10
    u = np.linspace(0.001, 0.999, 200)
    for s in (GUMBEL, INVERSE, SYNTHID):
        assert np.max(np.abs(null_cdf_array(s, null_ppf(s, u)) - u)) < 1e-10


def test_pivotseq_positions_increase():
    with pytest.raises(ValueError):
        PivotSeq.from_arrays([0.1, 0.2], [1, 2], [3, 4], GUMBEL, positions=[1, 1])
    assert len(PivotSeq.from_arrays([0.1, 0.2], [1, 2], [3, 4], GUMBEL)) == 2
