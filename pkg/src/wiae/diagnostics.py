"""Uniformity and independence diagnostics for innovations sequences."""

from __future__ import annotations

import numpy as np

from wiae.errors import ValidationError


def ks_statistic_uniform(values) -> float:
    """One-sample Kolmogorov-Smirnov statistic against U(0, 1).

    D = sup_z |F_n(z) - z| computed exactly from the order statistics.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n == 0:
        raise ValidationError("empty sample")
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ValidationError("sample values must lie in [0, 1]")
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - v)
    d_minus = np.max(v - (grid - 1.0 / n))
    return float(max(d_plus, d_minus))


def sample_autocorrelation(x, max_lag) -> np.ndarray:
    """Autocorrelation estimates r_1 .. r_max_lag (mean-removed, biased)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if max_lag < 1 or max_lag >= n:
        raise ValidationError("max_lag must be in [1, len(x) - 1]")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise ValidationError("constant sequence has undefined autocorrelation")
    return np.array([float(xc[:-lag] @ xc[lag:]) / denom for lag in range(1, max_lag + 1)])
