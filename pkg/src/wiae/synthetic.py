"""Synthetic processes with analytically known innovations and forecasts.

Gaussian AR(1) and finite-state Markov chains are the two families where
the causal innovations map and the conditional law at any horizon can be
written down exactly, which makes them the calibration ground truth for
the learned autoencoders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wiae.errors import ValidationError

_erf = np.frompyfunc(math.erf, 1, 1)
_SQRT2 = math.sqrt(2.0)


def norm_cdf(x):
    """Standard normal CDF via the C library erf (abs error < 1e-15)."""
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 * (1.0 + np.asarray(_erf(x / _SQRT2), dtype=np.float64))
    return out if out.ndim else float(out)


def norm_ppf(q):
    """Inverse standard normal CDF (stdlib rational approximation)."""
    from statistics import NormalDist

    if np.ndim(q) == 0:
        return NormalDist().inv_cdf(float(q))
    return np.array([NormalDist().inv_cdf(float(v)) for v in np.ravel(q)]).reshape(np.shape(q))


@dataclass(frozen=True)
class Ar1Spec:
    """x_t = a x_{t-1} + sigma w_t with w_t IID standard normal."""

    a: float
    sigma: float
    n: int
    seed: int = 0

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ValidationError("AR(1) coefficient must satisfy |a| < 1")
        if self.sigma <= 0:
            raise ValidationError("noise std must be positive")
        if self.n < 1:
            raise ValidationError("length must be >= 1")

    @property
    def stationary_std(self):
        return self.sigma / math.sqrt(1.0 - self.a * self.a)


def gen_ar1(spec: Ar1Spec) -> np.ndarray:
    """Simulate from the stationary distribution; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal(spec.n)
    x = np.empty(spec.n)
    x[0] = spec.stationary_std * w[0]
    for t in range(1, spec.n):
        x[t] = spec.a * x[t - 1] + spec.sigma * w[t]
    return x


def ar1_true_innovations(spec: Ar1Spec, x) -> np.ndarray:
    """Exact innovations of an AR(1) path, mapped to uniforms.

    The one-step prediction error (x_t - a x_{t-1}) / sigma is IID standard
    normal, so its probability integral transform is IID-uniform. The first
    sample uses the stationary marginal.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.empty_like(x)
    v[0] = norm_cdf(x[0] / spec.stationary_std)
    if x.size > 1:
        v[1:] = norm_cdf((x[1:] - spec.a * x[:-1]) / spec.sigma)
    return v


def ar1_conditional_law(spec: Ar1Spec, x_t, horizon):
    """(mean, std) of X_{t+T} given X_t = x_t.

    mean = a^T x_t, var = sigma^2 (1 - a^(2T)) / (1 - a^2).
    """
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    a2 = spec.a * spec.a
    var = spec.sigma ** 2 * (1.0 - a2 ** horizon) / (1.0 - a2)
    return spec.a ** horizon * x_t, math.sqrt(var)


@dataclass(frozen=True)
class MarkovChainSpec:
    """Finite-state stationary chain with real-valued state labels."""

    states: tuple
    transition: tuple  # row-stochastic matrix as nested tuples
    n: int
    seed: int = 0

    def __post_init__(self):
        p = self.matrix
        m = len(self.states)
        if p.shape != (m, m):
            raise ValidationError("transition matrix shape must match state count")
        if np.any(p < 0):
            raise ValidationError("transition probabilities must be non-negative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("transition matrix rows must sum to 1")
        if len(set(self.states)) != m:
            raise ValidationError("state labels must be distinct")
        if self.n < 1:
            raise ValidationError("length must be >= 1")
        if not _primitive(p):
            raise ValidationError("chain must be irreducible and aperiodic")

    @property
    def matrix(self):
        return np.asarray(self.transition, dtype=np.float64)

    @property
    def state_values(self):
        return np.asarray(self.states, dtype=np.float64)


def symmetric_two_state(p, n, seed=0, states=(-1.0, 1.0)):
    """Two-state chain that switches with probability p."""
    return MarkovChainSpec(
        states=tuple(states),
        transition=((1.0 - p, p), (p, 1.0 - p)),
        n=n,
        seed=seed,
    )


def _primitive(p, tol=0.0):
    """Primitivity (irreducible + aperiodic) via Wielandt's bound.

    A non-negative square matrix is primitive iff some power up to
    (m-1)^2 + 1 is entrywise positive.
    """
    m = p.shape[0]
    reach = (p > tol).astype(np.float64)
    power = np.eye(m)
    limit = (m - 1) ** 2 + 1
    for _ in range(limit):
        power = np.minimum(power @ reach, 1.0)
        if np.all(power > 0):
            return True
    return False


def markov_stationary(spec: MarkovChainSpec) -> np.ndarray:
    """Stationary distribution: solve pi (P - I) = 0 with sum(pi) = 1."""
    p = spec.matrix
    m = p.shape[0]
    a = np.vstack([p.T - np.eye(m), np.ones(m)])
    b = np.concatenate([np.zeros(m), [1.0]])
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    return np.maximum(pi, 0.0) / np.sum(np.maximum(pi, 0.0))


def gen_markov(spec: MarkovChainSpec) -> np.ndarray:
    """Simulate the chain from its stationary distribution."""
    rng = np.random.default_rng(spec.seed)
    p = spec.matrix
    pi = markov_stationary(spec)
    cum = np.cumsum(p, axis=1)
    u = rng.random(spec.n)
    idx = np.empty(spec.n, dtype=np.int64)
    idx[0] = np.searchsorted(np.cumsum(pi), u[0], side="right")
    for t in range(1, spec.n):
        idx[t] = np.searchsorted(cum[idx[t - 1]], u[t], side="right")
    return spec.state_values[idx]


def markov_conditional_pmf(spec: MarkovChainSpec, x_t, horizon) -> np.ndarray:
    """Conditional pmf over states at t + T: row of the T-step matrix."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    values = spec.state_values
    matches = np.nonzero(np.isclose(values, x_t, rtol=0.0, atol=1e-9))[0]
    if matches.size != 1:
        raise ValidationError(f"value {x_t!r} is not a state of the chain")
    pt = np.linalg.matrix_power(spec.matrix, horizon)
    return pt[matches[0]]
