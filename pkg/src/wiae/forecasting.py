"""Generative probabilistic forecasting with a trained autoencoder.

A forecast for time t + T conditions on the encoded innovations of the
observed history only; the T unrealized innovations are replaced by fresh
IID-uniform pseudo-innovations, one independent set per ensemble member.
Decoding the concatenated sequence and reading off the last position gives
one sample of X_{t+T} given the history; K draws form the ensemble that
all point, quantile, and interval outputs are computed from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wiae.errors import ValidationError
from wiae.model import WiaeModel
from wiae.ndiff import net as nd
from wiae.ndiff import tensor as td


@dataclass(frozen=True)
class ForecastRequest:
    history: np.ndarray
    horizon: int
    ensemble: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "history", np.asarray(self.history, dtype=np.float64))
        if self.history.ndim != 1:
            raise ValidationError("history must be a 1-D series")
        if not np.all(np.isfinite(self.history)):
            raise ValidationError("history contains non-finite values")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.ensemble < 1:
            raise ValidationError("ensemble size must be >= 1")


class ForecastEnsemble:
    """K samples of the series value at the requested target time."""

    def __init__(self, samples, provenance=None):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValidationError("ensemble must hold at least one sample")
        self.samples = samples
        self.provenance = provenance or {}
        self._sorted = None

    @property
    def k_samples(self):
        return self.samples.size

    @property
    def sorted(self):
        if self._sorted is None:
            self._sorted = np.sort(self.samples, kind="stable")
        return self._sorted

    def __len__(self):
        return self.samples.size


def generate_ensemble(model: WiaeModel, request: ForecastRequest) -> ForecastEnsemble:
    """Sample K conditional realizations of X_{t+T} given the history.

    The decoder input never contains raw series values: the history enters
    only through its encoded innovations, so conditioning is entirely on
    v_{0:t}. Each member consumes exactly T uniform draws from the
    per-request stream; member i is independent of member j by
    construction.
    """
    if not model.trained:
        raise ValidationError("model is not trained")
    k, t_len = model.k, request.history.size
    if t_len < k + 1:
        raise ValidationError(f"history must hold at least k+1 = {k + 1} samples")

    n_hist = max(0, k + 1 - request.horizon)
    v_hist = _encoded_tail(model, request.history, n_hist)

    rng = np.random.default_rng(request.seed)
    draws = rng.random((request.ensemble, request.horizon))
    windows = np.concatenate(
        [np.broadcast_to(v_hist, (request.ensemble, n_hist)), draws], axis=1
    )[:, -(k + 1):]

    samples = decode_windows(model, windows)
    return ForecastEnsemble(
        samples,
        provenance={
            "horizon": request.horizon,
            "ensemble": request.ensemble,
            "seed": request.seed,
            "history_len": t_len,
            "mode": model.mode,
            "k": model.k,
        },
    )


def _encoded_tail(model, history, n_tail):
    """Last ``n_tail`` innovations of the history (full-context encode)."""
    if n_tail == 0:
        return np.empty(0)
    ctx = history[-(2 * model.k + 1):]
    v = model.encode_sequence(ctx)
    return v.values[-n_tail:]


def decode_windows(model: WiaeModel, windows) -> np.ndarray:
    """Decode a batch of length-(k+1) innovations windows to scalar outputs."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2 or windows.shape[1] != model.k + 1:
        raise ValidationError(f"windows must be (batch, {model.k + 1})")
    if np.any(windows < 0.0) or np.any(windows > 1.0):
        raise ValidationError("innovations values must lie in [0, 1]")
    with td.no_grad():
        out = nd.forward(model.decoder_spec, model.decoder,
                         td.Tensor(windows[:, :, None]), causal=False)
    return model.norm.decode(out.data[:, 0, 0])


def point_mmse(ensemble: ForecastEnsemble) -> float:
    """Conditional-mean forecast: the ensemble average."""
    return float(np.mean(ensemble.samples))


def point_mmae(ensemble: ForecastEnsemble) -> float:
    """Conditional-median forecast.

    Odd K: the middle order statistic; even K: the average of the two
    central order statistics.
    """
    s = ensemble.sorted
    k = s.size
    if k % 2 == 1:
        return float(s[(k + 1) // 2 - 1])
    return float(0.5 * (s[k // 2 - 1] + s[k // 2]))


def quantile(ensemble: ForecastEnsemble, q) -> float:
    """Empirical q-quantile of the ensemble.

    With m = q * K: m integer gives the m-th order statistic; otherwise the
    average of order statistics floor(m) and floor(m) + 1. When m < 1 the
    formula has no sample to point at and the smallest sample is returned.

    Note this convention intentionally differs from ``point_mmae`` at
    q = 0.5 (the median formula averages the central pair at even K, the
    quantile rule picks the single K/2-th order statistic).
    """
    q = float(q)
    if not 0.0 < q < 1.0:
        raise ValidationError("quantile level must lie in (0, 1)")
    s = ensemble.sorted
    k = s.size
    m = q * k
    nearest = round(m)
    if nearest >= 1 and abs(m - nearest) <= 1e-9 * max(1.0, k):
        return float(s[int(nearest) - 1])
    lo = int(np.floor(m))
    if lo < 1:
        return float(s[0])
    return float(0.5 * (s[lo - 1] + s[lo]))
