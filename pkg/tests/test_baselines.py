import math

import numpy as np
import pytest
import scipy.stats as ss

from gofmark.baselines import UnsupportedSchemeError, orientation, score, sum_statistic
from gofmark.calibrate import mc_critical
from gofmark.gof import make_detector
from gofmark.prng import mix64
from gofmark.schemes import GUMBEL, INVERSE, SYNTHID, decode_many, gumbel_alt_cdf


def test_score_examples():
    assert score("Ars", 0.9) == pytest.approx(-math.log(0.1))
    assert score("Log", 1.0) == pytest.approx(0.0, abs=2e-12)
    assert score("Neg", 0.3) == -0.3
    assert score("Sum", 0.3) == 0.3
    assert score("Lst", 0.5, GUMBEL) == pytest.approx(0.5 ** 0.25 + 0.5 ** 4)
    assert np.isfinite(score("Ars", 1.0))


def test_lst_only_for_gumbel():
    with pytest.raises(UnsupportedSchemeError):
        score("Lst", 0.5, INVERSE)
    with pytest.raises(UnsupportedSchemeError):
        sum_statistic([0.5], "Lst", SYNTHID)
    with pytest.raises(ValueError):
        score(make_detector("Lst", delta=1.5), 0.5)


def test_lst_is_alternative_density():
    P = [0.8, 0.2]
    y = np.linspace(0.01, 0.99, 99)
    h = 1e-6
    num = np.array([(gumbel_alt_cdf(P, r + h) - gumbel_alt_cdf(P, r - h)) / (2 * h) for r in y])
    assert np.max(np.abs(num - score("Lst", y, GUMBEL))) < 1e-6


def test_monotonicity_on_grid():
    y = np.linspace(0.001, 0.999, 500)
    for name in ("Ars", "Log", "Sum", "Lst"):
        assert np.all(np.diff(score(name, y)) > 0)
    assert np.all(np.diff(score("Neg", y)) < 0)


def test_sum_statistic_examples_and_orientation():
    assert sum_statistic([0.5, 0.5], "Sum") == 1.0
    assert sum_statistic([0.9, 0.9], "Ars") == pytest.approx(4.605170185988091)
    assert orientation("Neg") == -1
    # the inverse-transform baseline is flipped so larger always means "more watermark"
    assert sum_statistic([0.2, 0.3], "Neg") == pytest.approx(0.5)
    rows = sum_statistic(np.array([[0.5, 0.5], [0.9, 0.9]]), "Sum")
    assert rows.tolist() == [1.0, 1.8]


def test_ars_null_is_gamma():
    gam = mc_critical(GUMBEL, "Ars", 100, 0.01, B=100_000, seed=3)
    assert gam == pytest.approx(ss.gamma(100).ppf(0.99), rel=0.01)


def test_ars_mean_shift_under_watermark():
    seeds = mix64(np.arange(50_000, dtype=np.uint64))
    _, y = decode_many(GUMBEL, [0.6, 0.3, 0.1], seeds)
    s = score("Ars", y)
    assert (s.mean() - 1.0) / (s.std() / math.sqrt(s.size)) > 5
