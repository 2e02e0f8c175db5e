"""Regularised incomplete gamma function and chi-squared quantiles."""

from __future__ import annotations

import math

_ITMAX = 1000
_TINY = 1e-300


def _series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _contfrac(a: float, x: float) -> float:
    # modified Lentz for the upper tail Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularised lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("shape must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _series(a, x)
    return 1.0 - _contfrac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _series(a, x)
    return _contfrac(a, x)


def chi2_cdf(x: float, df: float) -> float:
    return gammainc_lower(df / 2.0, x / 2.0)


def chi2_sf(x: float, df: float) -> float:
    return gammainc_upper(df / 2.0, x / 2.0)


def chi2_ppf_upper(alpha: float, df: float) -> float:
    """The ``x`` with upper-tail probability ``alpha``, found by bisection."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return 0.0
    lo, hi = 0.0, max(1.0, df)
    while chi2_sf(hi, df) > alpha:
        lo, hi = hi, 2.0 * hi
    # near alpha = 1 the lower tail is the accurate one to compare against
    lower = alpha > 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (chi2_cdf(mid, df) < 1.0 - alpha) if lower else (chi2_sf(mid, df) > alpha):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)
