"""Optimizer updates against hand-iterated reference recursions."""

import numpy as np
import pytest

from wiae.errors import DivergenceError, ValidationError
from wiae.ndiff import net as nd
from wiae.ndiff import optim


def _store():
    spec = nd.NetworkSpec(layers=(nd.LayerSpec("dense", 1, 1),), window=1)
    params = nd.ParamStore(spec, seed=0)
    params.load_values({"L0.w": np.array([[1.0]]), "L0.b": np.array([0.0])})
    return params


def test_sgd_basic_step():
    params = _store()
    optim.Sgd(0.1).step(params, {"L0.w": np.array([[2.0]]), "L0.b": np.array([0.0])})
    assert params["L0.w"].data[0, 0] == pytest.approx(0.8)


def test_zero_gradient_leaves_params_unchanged():
    params = _store()
    before = params.values()
    optim.Adam(0.1).step(params, {"L0.w": np.zeros((1, 1)), "L0.b": np.zeros(1)})
    # adam with zero gradient: m = v = 0, update is exactly 0/(0 + eps)
    for name in params.names():
        np.testing.assert_array_equal(params[name].data, before[name])


def test_adam_matches_hand_iterated_recursion():
    """Constant gradient stream: compare five steps against the reference
    recursion m_t = b1 m + (1-b1) g, v_t = b2 v + (1-b2) g^2 with bias
    correction, iterated independently here."""
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    g = 0.3
    params = _store()
    opt = optim.Adam(lr, b1, b2, eps)

    p_ref = 1.0
    m = v = 0.0
    for t in range(1, 6):
        opt.step(params, {"L0.w": np.array([[g]]), "L0.b": np.array([0.0])})
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p_ref = p_ref - lr * m_hat / (np.sqrt(v_hat) + eps)
        assert params["L0.w"].data[0, 0] == pytest.approx(p_ref, rel=1e-12)


def test_nonfinite_gradient_raises_with_step_index():
    params = _store()
    opt = optim.Sgd(0.1)
    opt.step(params, {"L0.w": np.array([[1.0]]), "L0.b": np.array([0.0])})
    with pytest.raises(DivergenceError, match="divergence detected") as err:
        opt.step(params, {"L0.w": np.array([[np.nan]]), "L0.b": np.array([0.0])})
    assert err.value.step == 2


def test_gradient_shape_mismatch():
    params = _store()
    with pytest.raises(ValidationError, match="shape"):
        optim.Sgd(0.1).step(params, {"L0.w": np.zeros(3), "L0.b": np.zeros(1)})


def test_invalid_learning_rate():
    with pytest.raises(ValidationError):
        optim.Sgd(0.0)
    with pytest.raises(ValidationError):
        optim.Adam(-1.0)
