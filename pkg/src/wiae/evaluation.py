"""Backtest pipelines: build evaluation records from forecasters.

Three forecaster sources share one scoring path:

* a trained autoencoder (fast batched decoding against a precomputed
  innovations sequence),
* the analytic AR(1) oracle (closed-form conditional laws),
* rolling mode: retrain on each schedule window, score its test span.

Targets are indexed by decision time t; the scored value is the realized
sample at t + horizon. Decision times start at t = k so that the first
k + horizon padding-distorted indices of a series are never scored.
"""

from __future__ import annotations

import numpy as np

from wiae.dataio import RollingSchedule, rolling_splits
from wiae.errors import ValidationError
from wiae.forecasting import ForecastEnsemble, decode_windows, point_mmae, point_mmse
from wiae.metrics import EvaluationRecord, GaussianLaw, crps_record, evaluate_records
from wiae.model import WiaeModel
from wiae.ndiff import net as nd
from wiae.ndiff import tensor as td
from wiae.synthetic import Ar1Spec, ar1_conditional_law
from wiae.training import TrainConfig, train


def decision_times(n, k, horizon, stride=1, max_targets=None, start=None, stop=None):
    first = k if start is None else max(start, k)
    last = n - horizon if stop is None else min(stop, n - horizon)
    ts = list(range(first, last, stride))
    if max_targets is not None:
        ts = ts[:max_targets]
    if not ts:
        raise ValidationError("no decision times fit the series and horizon")
    return ts


def model_records(model: WiaeModel, series, horizon, ensemble, seed,
                  stride=1, max_targets=None, start=None, stop=None):
    """Score a trained model over a series with one shared encoding pass."""
    if not model.trained:
        raise ValidationError("model is not trained")
    series = np.asarray(series, dtype=np.float64)
    k = model.k
    ts = decision_times(series.size, k, horizon, stride, max_targets, start, stop)

    z = model.norm.encode(series)
    with td.no_grad():
        v_seq = nd.forward(model.encoder_spec, model.encoder, z, causal=True).data

    n_hist = max(0, k + 1 - horizon)
    rng = np.random.default_rng(seed)
    records = []
    for t in ts:
        draws = rng.random((ensemble, horizon))
        if n_hist:
            hist = np.broadcast_to(v_seq[t - n_hist + 1: t + 1], (ensemble, n_hist))
            windows = np.concatenate([hist, draws], axis=1)
        else:
            windows = draws[:, -(k + 1):]
        samples = decode_windows(model, windows)
        records.append(
            EvaluationRecord(
                target_index=t + horizon,
                realized=float(series[t + horizon]),
                forecast=ForecastEnsemble(samples),
                horizon=horizon,
            )
        )
    return records


def ar1_oracle_records(a, sigma, series, horizon, k=0,
                       stride=1, max_targets=None, start=None, stop=None):
    """Score the exact conditional law of an AR(1) process over a series.

    ``k`` only aligns the scored targets with a model under comparison;
    the oracle itself needs one sample of history.
    """
    series = np.asarray(series, dtype=np.float64)
    spec = Ar1Spec(a=a, sigma=sigma, n=max(2, series.size))
    ts = decision_times(series.size, k, horizon, stride, max_targets, start, stop)
    records = []
    for t in ts:
        mean, std = ar1_conditional_law(spec, float(series[t]), horizon)
        records.append(
            EvaluationRecord(
                target_index=t + horizon,
                realized=float(series[t + horizon]),
                forecast=GaussianLaw(mean, std),
                horizon=horizon,
            )
        )
    return records


def rolling_records(series, schedule: RollingSchedule, model_args, train_config: TrainConfig,
                    ensemble, seed, stride=1):
    """Retrain per schedule split and score each split's test span.

    Returns (records, per_split) where per_split holds one summary row per
    retraining window.
    """
    series = np.asarray(series, dtype=np.float64)
    model_args = dict(model_args)
    model_args.pop("seed", None)
    k = model_args.get("k", 16)
    schedule.validate_for_model(k)

    splits = rolling_splits(series, schedule)
    records, per_split = [], []
    for i, (tr, te) in enumerate(splits):
        model = WiaeModel(seed=seed + i, **model_args)
        cfg = TrainConfig.from_dict({**train_config.to_dict(), "seed": seed + i})
        model, _ = train(model, series[tr], cfg)
        span = te.stop - te.start if schedule.eval_span is None else min(
            te.stop - te.start, schedule.eval_span
        )
        split_records = model_records(
            model, series, schedule.horizon, ensemble, seed=seed + 1000 + i,
            stride=stride, start=te.start - schedule.horizon,
            stop=te.start - schedule.horizon + span,
        )
        crps_vals = [crps_record(r) for r in split_records]
        per_split.append(
            {"split": i, "n_records": len(split_records),
             "crps_avg": float(np.mean(crps_vals))}
        )
        records.extend(split_records)
    return records, per_split


def summarize(records, alphas):
    """Metric summary plus per-record rows for CSV export."""
    summary = evaluate_records(records, alphas)
    rows = []
    for r in records:
        if isinstance(r.forecast, GaussianLaw):
            mean = median = r.forecast.mean
        else:
            mean = point_mmse(r.forecast)
            median = point_mmae(r.forecast)
        rows.append(
            {
                "target_index": r.target_index,
                "horizon": r.horizon,
                "realized": r.realized,
                "forecast_mean": mean,
                "forecast_median": median,
                "crps": crps_record(r),
            }
        )
    return summary, rows
