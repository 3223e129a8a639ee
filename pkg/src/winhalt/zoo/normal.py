"""Standard normal utilities: an erf series, the CDF, and quantiles by bisection.

``erf`` sums the everywhere-positive series

    erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))

until the terms drop below 1e-17 of the running sum, and returns +-1 beyond
|x| > 6, where the true value is within 3e-17 of it.  ``normal_quantile``
bisects the CDF on [-10, 10] to a fixed tolerance.
"""
from __future__ import annotations

import math

__all__ = ["erf", "normal_cdf", "normal_sf", "normal_quantile", "Z_TWO_THIRDS", "TOL"]

TOL = 1e-12


def erf(x: float) -> float:
    if x < 0:
        return -erf(-x)
    if x > 6.0:
        return 1.0
    x2 = x * x
    term = x
    total = x
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return min(1.0, 2.0 / math.sqrt(math.pi) * math.exp(-x2) * total)


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def normal_sf(x: float) -> float:
    """Upper tail P(Z > x)."""
    return 1.0 - normal_cdf(x)


def normal_quantile(p: float, tol: float = TOL) -> float:
    """x with normal_cdf(x) = p, to within ``tol`` in x."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    lo, hi = -10.0, 10.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# upper tail beyond this point is 1/3
Z_TWO_THIRDS = normal_quantile(2.0 / 3.0)
