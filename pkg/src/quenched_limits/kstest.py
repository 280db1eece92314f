"""Kolmogorov-Smirnov machinery, self-contained.

One-sample statistic against an arbitrary CDF, two-sample statistic, and
the asymptotic Kolmogorov survival function used as the p-value proxy.
"""

from __future__ import annotations

import math

import numpy as np


def ks_statistic(samples: np.ndarray, cdf) -> float:
    """sup-norm distance between the empirical CDF and a reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    c = np.asarray(cdf(x), dtype=float)
    hi = np.max(np.arange(1, n + 1) / n - c)
    lo = np.max(c - np.arange(0, n) / n)
    return float(max(hi, lo))


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """P(K > lam) for the Kolmogorov distribution (alternating series)."""
    if lam <= 0:
        return 1.0
    s = 0.0
    for k in range(1, terms + 1):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        s += term
        if abs(term) < 1e-16:
            break
    return min(max(s, 0.0), 1.0)


def ks_pvalue(d: float, n: int) -> float:
    """Asymptotic p-value with the Stephens small-sample correction."""
    sqn = math.sqrt(n)
    lam = (sqn + 0.12 + 0.11 / sqn) * d
    return kolmogorov_sf(lam)


def ks_test(samples: np.ndarray, cdf) -> tuple[float, float]:
    d = ks_statistic(samples, cdf)
    return d, ks_pvalue(d, len(samples))


def ks_2samp(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sample KS distance and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = a.size * b.size / (a.size + b.size)
    return d, kolmogorov_sf(math.sqrt(n_eff) * d)


def normal_cdf(x: np.ndarray, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    from scipy.special import ndtr
    return ndtr((np.asarray(x) - mu) / sigma)
