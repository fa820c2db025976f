"""Plain SGD and adaptive-moment (Adam) parameter updates."""

from __future__ import annotations

import numpy as np

from wiae.errors import DivergenceError, ValidationError


class Sgd:
    def __init__(self, lr):
        if lr <= 0:
            raise ValidationError("learning rate must be positive")
        self.lr = float(lr)
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for name in params.names():
            g = _checked(grads, name, params, self.t)
            params[name].data = params[name].data - self.lr * g


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValidationError("learning rate must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValidationError("betas must lie in [0, 1)")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, params, grads):
        self.t += 1
        for name in params.names():
            g = _checked(grads, name, params, self.t)
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            params[name].data = params[name].data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _checked(grads, name, params, step):
    g = np.asarray(grads[name], dtype=np.float64)
    if g.shape != params[name].data.shape:
        raise ValidationError(f"gradient shape mismatch for {name}")
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"divergence detected: non-finite gradient for {name}", step=step)
    return g


def optimizer_step(params, grads, optimizer):
    """Apply one configured update rule; deterministic given optimizer state."""
    optimizer.step(params, grads)
    return params
