"""Probabilistic-forecast scoring: CRPS, coverage intervals, CPE/ACPE.

CRPS is the integral of (F_hat(z) - 1{x <= z})^2 over the real line. For
an ensemble with empirical CDF F_hat this equals the energy form

    mean_i |s_i - y| - (1 / (2 K^2)) sum_ij |s_i - s_j|

exactly, which is what :func:`crps_ensemble` evaluates (via an O(K log K)
order-statistic identity). Analytic Gaussian forecasts are scored with the
closed form so oracle forecasters run through the same evaluation path as
ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wiae.errors import ValidationError
from wiae.forecasting import ForecastEnsemble, quantile
from wiae.synthetic import norm_cdf, norm_ppf

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class GaussianLaw:
    """Analytic conditional-CDF handle N(mean, std^2)."""

    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise ValidationError("std must be positive")

    def cdf(self, z):
        return norm_cdf((z - self.mean) / self.std)

    def crps(self, realized):
        z = (realized - self.mean) / self.std
        phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return self.std * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * phi - _INV_SQRT_PI)

    def interval(self, alpha):
        _check_alpha(alpha)
        half = norm_ppf((1.0 + alpha) / 2.0) * self.std
        return CoverageInterval(alpha, self.mean - half, self.mean + half)


@dataclass(frozen=True)
class CoverageInterval:
    """Central interval predicted to contain the target with probability alpha."""

    alpha: float
    lower: float
    upper: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.lower > self.upper:
            raise ValidationError("interval bounds out of order")

    def contains(self, x):
        return self.lower <= x <= self.upper


@dataclass(frozen=True)
class EvaluationRecord:
    """One scored target: realized value plus the forecast issued for it."""

    target_index: int
    realized: float
    forecast: object  # ForecastEnsemble | GaussianLaw
    horizon: int

    def __post_init__(self):
        if not np.isfinite(self.realized):
            raise ValidationError("realized value must be finite")
        if not isinstance(self.forecast, (ForecastEnsemble, GaussianLaw)):
            raise ValidationError("forecast must be an ensemble or an analytic law")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValidationError("coverage level must lie in (0, 1)")


def crps_ensemble(ensemble, realized) -> float:
    """CRPS of an ensemble forecast against the realized value."""
    samples = ensemble.sorted if isinstance(ensemble, ForecastEnsemble) else np.sort(
        np.asarray(ensemble, dtype=np.float64)
    )
    if samples.size < 1:
        raise ValidationError("ensemble must hold at least one sample")
    if not np.isfinite(realized):
        raise ValidationError("realized value must be finite")
    k = samples.size
    term1 = float(np.mean(np.abs(samples - realized)))
    # sum_ij |s_i - s_j| = 2 * sum_i (2i - 1 - K) s_(i)  (1-indexed order stats)
    coeff = 2.0 * np.arange(1, k + 1) - 1.0 - k
    term2 = float(coeff @ samples) / (k * k)
    return term1 - term2


def crps_record(record: EvaluationRecord) -> float:
    if isinstance(record.forecast, GaussianLaw):
        return record.forecast.crps(record.realized)
    return crps_ensemble(record.forecast, record.realized)


def crps_average(records) -> float:
    """Mean CRPS over evaluation records (the empirical score estimate)."""
    records = list(records)
    if not records:
        raise ValidationError("no records to average")
    return float(np.mean([crps_record(r) for r in records]))


def coverage_interval(forecast, alpha) -> CoverageInterval:
    """Equal-tail central interval [q((1-a)/2), q((1+a)/2)].

    Requires enough ensemble members to resolve the tails: (1-a)/2 * K must
    reach the first order statistic.
    """
    _check_alpha(alpha)
    if isinstance(forecast, GaussianLaw):
        return forecast.interval(alpha)
    if not isinstance(forecast, ForecastEnsemble):
        forecast = ForecastEnsemble(np.asarray(forecast, dtype=np.float64))
    if forecast.k_samples * (1.0 - alpha) / 2.0 < 1.0:
        raise ValidationError(
            f"insufficient ensemble: need K >= {math.ceil(2.0 / (1.0 - alpha))} "
            f"for alpha = {alpha}"
        )
    lo = quantile(forecast, (1.0 - alpha) / 2.0)
    hi = quantile(forecast, (1.0 + alpha) / 2.0)
    return CoverageInterval(alpha, lo, hi)


def cpe(intervals, realized, alpha) -> float:
    """Signed coverage probability error: empirical coverage minus alpha."""
    intervals = list(intervals)
    realized = np.asarray(realized, dtype=np.float64)
    if len(intervals) != realized.size or not intervals:
        raise ValidationError("intervals and realizations must align and be nonempty")
    hits = np.fromiter(
        (iv.contains(x) for iv, x in zip(intervals, realized)), dtype=np.float64
    )
    return float(np.mean(hits) - alpha)


def acpe(intervals, realized, alpha) -> float:
    """Absolute coverage probability error."""
    return abs(cpe(intervals, realized, alpha))


def evaluate_records(records, alphas=(0.5, 0.9)):
    """Aggregate CRPS and coverage metrics over evaluation records.

    Returns a dict with the average CRPS and, per coverage level, the
    empirical coverage, CPE, and ACPE.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records to evaluate")
    out = {
        "n_records": len(records),
        "crps_avg": crps_average(records),
        "coverage": {},
    }
    realized = [r.realized for r in records]
    for alpha in alphas:
        intervals = [coverage_interval(r.forecast, alpha) for r in records]
        signed = cpe(intervals, realized, alpha)
        out["coverage"][f"{alpha:g}"] = {
            "alpha": alpha,
            "empirical": signed + alpha,
            "cpe": signed,
            "acpe": abs(signed),
        }
    return out
