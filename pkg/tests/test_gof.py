import math

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given, strategies as st

from gofmark.gof import (EPS, GOF_NAMES, DomainError, Detector, chi2_counts, detect,
                         gof_statistic, k_s, make_detector, parse_detector, phi_s, stat_ad,
                         stat_chi2, stat_cvm, stat_kol, stat_kuiper, stat_neyman, stat_trgof,
                         stat_watson, statistic, to_pvalues)
from gofmark.schemes import GUMBEL, INVERSE, SYNTHID

pvals = st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=60).map(np.array)


def test_to_pvalues_examples():
    assert to_pvalues([0.9], GUMBEL)[0] == pytest.approx(0.1)
    assert to_pvalues([0.5], INVERSE)[0] == pytest.approx(0.75)
    assert to_pvalues([0.5], SYNTHID)[0] == pytest.approx(0.5)
    assert to_pvalues([1.0, 0.0], GUMBEL).tolist() == [EPS, 1 - EPS]


# Hand examples: each value was worked out by hand from the formula.
@pytest.mark.parametrize("fn,p,want", [
    (stat_kol, [0.5], 0.5), (stat_kol, [0.25, 0.75], 0.25), (stat_kol, [0.2, 0.6], 0.4),
    (stat_kuiper, [0.7], 1.0), (stat_kuiper, [0.2, 0.6], 0.6), (stat_kuiper, [0.25, 0.75], 0.5),
    (stat_cvm, [0.5], 1 / 12), (stat_cvm, [0.25, 0.75], 1 / 24), (stat_cvm, [0.9], 0.2433333333333333),
    (stat_watson, [0.9], 1 / 12), (stat_watson, [0.1], 1 / 12), (stat_watson, [0.25, 0.75], 1 / 24),
    (stat_ad, [0.5], 0.38629436111989063),
])
def test_hand_examples(fn, p, want):
    assert fn(p) == pytest.approx(want, abs=1e-9)


def test_ad_hand_value_by_formula():
    want = -2 - 0.5 * (math.log(0.0625) + 3 * math.log(0.5625))
    assert stat_ad([0.25, 0.75]) == pytest.approx(want, abs=1e-12)


def test_neyman_examples():
    assert stat_neyman([0.5], 3) == pytest.approx(1.25)
    assert stat_neyman([0.25, 0.75], 3) == pytest.approx(0.15625)
    # roots of h2 make the second component vanish
    r = 0.5 - math.sqrt(3) / 6
    assert stat_neyman([r, 1 - r], 2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        stat_neyman([0.5], 4)


def test_chi2_examples():
    assert stat_chi2([0.1, 0.2, 0.6, 0.7], 2) == 0.0
    assert stat_chi2([0.1, 0.2, 0.3, 0.4], 2) == 4.0
    assert stat_chi2([0.1, 0.3, 0.6, 0.9], 4) == 0.0
    assert chi2_counts([1.0, 0.0], 2).tolist() == [1, 1]
    with pytest.raises(ValueError):
        stat_chi2([0.5], 1)


def test_trgof_examples():
    assert stat_trgof([0.6, 0.9]) == 0.0
    assert stat_trgof([0.2, 0.6], c_plus=0.5) == pytest.approx(0.28125)
    # the truncation drops p-values below p+ (here the smallest one)
    assert stat_trgof([0.001, 0.3, 0.9], c_plus=0.01) == pytest.approx(
        max(k_s(1 / 3, 0.001, 2), k_s(2 / 3, 0.3, 2)))


def test_phi_and_k_at_s2():
    x = np.linspace(0.05, 3, 100)
    assert np.allclose(phi_s(x, 2), (x - 1) ** 2 / 2, atol=1e-12)
    u, v = np.meshgrid(np.linspace(0.01, 0.99, 10), np.linspace(0.01, 0.99, 10))
    generic = v * phi_s(u / v, 2) + (1 - v) * phi_s((1 - u) / (1 - v), 2)
    assert np.allclose(k_s(u, v, 2), generic, atol=1e-12)
    # s = 1 is the Kullback-Leibler limit
    assert k_s(0.3, 0.2, 1) == pytest.approx(0.3 * math.log(1.5) + 0.7 * math.log(0.7 / 0.8))


def test_against_scipy():
    p = np.random.default_rng(1).random(137)
    assert stat_kol(p) == pytest.approx(ss.kstest(p, "uniform").statistic, abs=1e-12)
    assert stat_cvm(p) == pytest.approx(ss.cramervonmises(p, "uniform").statistic, abs=1e-10)
    counts = chi2_counts(p, 10)
    assert stat_chi2(p, 10) == pytest.approx(ss.chisquare(counts).statistic, abs=1e-10)
    # Anderson-Darling as the weighted integral of (F_n - F)^2 / (F(1-F)), evaluated piecewise
    ps = np.sort(p)
    n = p.size
    grid = np.concatenate(([0.0], ps, [1.0]))
    total = 0.0
    for i in range(n + 1):
        a, b, Fn = grid[i], grid[i + 1], i / n
        def prim(x):
            with np.errstate(divide="ignore", invalid="ignore"):
                lx = 0.0 if x == 0 else math.log(x)
                l1 = 0.0 if x == 1 else math.log(1 - x)
            return Fn ** 2 * lx - (1 - Fn) ** 2 * l1 - x
        if b > a:
            total += prim(b) - prim(a)
    assert stat_ad(p) == pytest.approx(n * total, rel=1e-9)


def test_ad_domain_error():
    with pytest.raises(DomainError):
        stat_ad([0.0, 0.5])


@given(pvals, st.randoms())
def test_permutation_invariance(p, rnd):
    q = p.copy()
    rnd.shuffle(q)
    for name in GOF_NAMES:
        d = make_detector(name)
        assert gof_statistic(d, q) == pytest.approx(gof_statistic(d, p), abs=1e-12)


@given(pvals)
def test_ranges_and_dominance(p):
    D, V = stat_kol(p), stat_kuiper(p)
    assert 0 <= D <= 1 and 0 <= V <= 2 and V >= D - 1e-15
    for fn in (stat_ad, stat_cvm, stat_watson, stat_neyman, stat_chi2, stat_trgof):
        assert fn(p) >= -1e-12


def test_uniform_fit_limits():
    n = 400
    p = (2 * np.arange(1, n + 1) - 1) / (2 * n)
    assert stat_cvm(p) == pytest.approx(1 / (12 * n))
    assert stat_chi2(p, 10) == 0.0
    assert stat_neyman(p, 3) < 1e-3


def test_row_wise_matches_single():
    P = np.random.default_rng(2).random((5, 30))
    for name in GOF_NAMES:
        d = make_detector(name)
        rows = gof_statistic(d, P)
        assert np.allclose(rows, [gof_statistic(d, r) for r in P], atol=1e-12)


def test_detector_labels_round_trip():
    for text in ("Phi", "Kui", "Chi[bins=20]", "Ney[k=2]", "Lst[delta=0.3]", "Ars"):
        d = parse_detector(text)
        assert parse_detector(d.label) == d
    assert make_detector("chi").label == "Chi[bins=10]"
    assert make_detector("Phi").label == "Phi[s=2.0]"
    with pytest.raises(ValueError):
        make_detector("Foo")


def test_detect_strict_boundary_and_checks():
    from gofmark.calibrate import CriticalRecord

    y = np.array([0.9, 0.8, 0.95])
    d = make_detector("Kol")
    s = statistic(d, y, GUMBEL)
    assert not detect(y, d, s, 0.01, GUMBEL).reject
    assert detect(y, d, s - 1e-9, 0.01, GUMBEL).reject
    rec = CriticalRecord("gumbel", "Kol", 4, 0.01, 1000, 0, 0.5)
    with pytest.raises(ValueError):
        detect(y, d, rec, 0.01, GUMBEL)
    rec3 = CriticalRecord("gumbel", "Kol", 3, 0.01, 1000, 0, 0.5)
    assert detect(y, d, rec3, scheme=GUMBEL).gamma == 0.5
    with pytest.raises(ValueError):
        detect(y, make_detector("Kui"), rec3, scheme=GUMBEL)
