"""Network layer: causal convolution semantics, forward oracle, checkpoints."""

import numpy as np
import pytest

from wiae.errors import ValidationError
from wiae.ndiff import net as nd
from wiae.ndiff import tensor as td


# -- causal_conv1d -----------------------------------------------------------

def test_conv_identity_kernel():
    np.testing.assert_array_equal(nd.causal_conv1d([3, 1, 4], [1]), [3, 1, 4])


def test_conv_unit_delay():
    np.testing.assert_array_equal(nd.causal_conv1d([3, 1, 4], [0, 1]), [0, 3, 1])


def test_conv_moving_average():
    # direct convolution sum by hand: [0.5*1, 0.5*2+0.5*1, 0.5*3+0.5*2]
    np.testing.assert_allclose(nd.causal_conv1d([1, 2, 3], [0.5, 0.5]), [0.5, 1.5, 2.5])


def test_conv_empty_input_rejected():
    with pytest.raises(ValidationError, match="empty sequence"):
        nd.causal_conv1d([], [1.0])


def test_conv_matches_numpy_convolve():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(1, 40)
        k = rng.integers(1, 9)
        x = rng.normal(size=n)
        kernel = rng.normal(size=k)
        bias = rng.normal()
        expect = np.convolve(x, kernel)[:n] + bias
        np.testing.assert_allclose(nd.causal_conv1d(x, kernel, bias), expect, atol=1e-12)


# -- specs -------------------------------------------------------------------

def test_receptive_field_must_match_window():
    with pytest.raises(ValidationError, match="receptive field"):
        nd.NetworkSpec(
            layers=(nd.LayerSpec("conv", 1, 4, kernel=3), nd.LayerSpec("conv", 4, 1, kernel=3)),
            window=3,
        )


def test_conv_spec_receptive_field():
    for k in (0, 1, 2, 5, 16):
        spec = nd.conv_spec(k, hidden=8)
        rf = 1 + sum(l.kernel - 1 for l in spec.layers)
        assert rf == k + 1 == spec.window


def test_mixed_kinds_rejected():
    with pytest.raises(ValidationError, match="mix"):
        nd.NetworkSpec(
            layers=(nd.LayerSpec("conv", 1, 4, kernel=2), nd.LayerSpec("dense", 4, 1)),
            window=2,
        )


def test_fan_mismatch_rejected():
    with pytest.raises(ValidationError, match="fan mismatch"):
        nd.NetworkSpec(
            layers=(nd.LayerSpec("dense", 3, 4), nd.LayerSpec("dense", 5, 1)),
            window=3,
        )


# -- forward -----------------------------------------------------------------

def test_forward_affine_single_dense():
    spec = nd.NetworkSpec(layers=(nd.LayerSpec("dense", 1, 1),), window=1)
    params = nd.ParamStore(spec, seed=0)
    params.load_values({"L0.w": np.array([[2.0]]), "L0.b": np.array([1.0])})
    out = nd.forward(spec, params, np.array([3.0]))
    assert out.data.tolist() == [7.0]


def test_forward_identity_composition():
    spec = nd.NetworkSpec(
        layers=(nd.LayerSpec("conv", 1, 1, kernel=1), nd.LayerSpec("conv", 1, 1, kernel=1)),
        window=1,
    )
    params = nd.ParamStore(spec, seed=0)
    params.load_values(
        {
            "L0.w": np.array([[1.0]]),
            "L0.b": np.array([0.0]),
            "L1.w": np.array([[1.0]]),
            "L1.b": np.array([0.0]),
        }
    )
    x = np.random.default_rng(1).normal(size=9)
    np.testing.assert_array_equal(nd.forward(spec, params, x).data, x)


def _straight_line_conv_net(spec, params, x):
    """Independent reimplementation: explicit loops over taps and channels."""
    h = x[:, None]  # (L, channels)
    for i, layer in enumerate(spec.layers):
        w = params[f"L{i}.w"].data  # (kernel * fan_in, fan_out)
        b = params[f"L{i}.b"].data
        length = h.shape[0]
        out = np.zeros((length, layer.fan_out))
        for t in range(length):
            for o in range(layer.fan_out):
                acc = b[o]
                for j in range(layer.kernel):  # j-th tap, oldest first
                    t_in = t - (layer.kernel - 1 - j)
                    if t_in < 0:
                        continue
                    for c in range(layer.fan_in):
                        acc += w[j * layer.fan_in + c, o] * h[t_in, c]
                out[t, o] = acc
        if layer.activation == "lrelu":
            out = np.where(out > 0, out, 0.2 * out)
        elif layer.activation == "sigmoid":
            out = 1.0 / (1.0 + np.exp(-out))
        h = out
    return h[:, 0]


def test_forward_matches_straight_line_reimplementation():
    rng = np.random.default_rng(7)
    spec = nd.conv_spec(5, hidden=6, pointwise_layers=1, out_activation="sigmoid")
    params = nd.ParamStore(spec, seed=3)
    x = rng.normal(size=20)
    got = nd.forward(spec, params, x).data
    expect = _straight_line_conv_net(spec, params, x)
    np.testing.assert_allclose(got, expect, atol=1e-12)


def test_forward_shape_mismatch():
    spec = nd.dense_spec(4, hidden=3, depth=1)
    params = nd.ParamStore(spec, seed=0)
    with pytest.raises(ValidationError):
        nd.forward(spec, params, np.ones((2, 5)))


def test_causality_random_perturbations():
    """Perturbing inputs after t never changes outputs up to t."""
    rng = np.random.default_rng(3)
    for k in (1, 3, 8):
        spec = nd.conv_spec(k, hidden=5, pointwise_layers=1)
        params = nd.ParamStore(spec, seed=k)
        x = rng.normal(size=30)
        base = nd.forward(spec, params, x).data
        for _ in range(5):
            t = int(rng.integers(0, 29))
            pert = x.copy()
            pert[t + 1:] += rng.normal(size=29 - t)
            out = nd.forward(spec, params, pert).data
            np.testing.assert_array_equal(out[: t + 1], base[: t + 1])


def test_window_truncation():
    """Inputs more than k lags back never influence the output."""
    rng = np.random.default_rng(4)
    k = 4
    spec = nd.conv_spec(k, hidden=5, pointwise_layers=1)
    params = nd.ParamStore(spec, seed=2)
    x = rng.normal(size=25)
    base = nd.forward(spec, params, x).data
    pert = x.copy()
    pert[:25 - k - 1] = rng.normal(size=25 - k - 1)
    out = nd.forward(spec, params, pert).data
    assert out[-1] == base[-1]


def test_backward_linear_case():
    spec = nd.NetworkSpec(layers=(nd.LayerSpec("dense", 1, 1),), window=1)
    params = nd.ParamStore(spec, seed=0)
    params.load_values({"L0.w": np.array([[1.5]]), "L0.b": np.array([0.0])})
    out = nd.forward(spec, params, np.array([[3.0]]))
    grads = nd.backward(out, np.ones((1, 1)), params)
    assert grads["L0.w"][0, 0] == 3.0
    assert grads["L0.b"][0] == 1.0


def test_backward_finite_difference_all_layer_kinds():
    rng = np.random.default_rng(9)
    cases = [
        nd.conv_spec(3, hidden=4, pointwise_layers=1, out_activation="sigmoid"),
        nd.dense_spec(5, hidden=6, depth=2),
    ]
    for spec in cases:
        params = nd.ParamStore(spec, seed=1)
        if spec.form == "conv":
            x = rng.normal(size=14)
        else:
            x = rng.normal(size=(3, 5))

        def loss():
            out = nd.forward(spec, params, x)
            return td.tmean(td.square(out)).item()

        out = nd.forward(spec, params, x)
        seed_grad = np.full(out.shape, 2.0 / out.size)  # d(mean(out^2)) = 2 out / n
        grads = nd.backward(out, seed_grad * out.data, params)
        for name in params.names():
            arr = params[name].data
            for i in rng.choice(arr.size, size=min(4, arr.size), replace=False):
                base = arr.flat[i]
                arr.flat[i] = base + 1e-6
                lp = loss()
                arr.flat[i] = base - 1e-6
                lm = loss()
                arr.flat[i] = base
                fd = (lp - lm) / 2e-6
                assert grads[name].flat[i] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_zero_output_gradient():
    spec = nd.dense_spec(3, hidden=4, depth=1)
    params = nd.ParamStore(spec, seed=5)
    out = nd.forward(spec, params, np.ones((2, 3)))
    grads = nd.backward(out, np.zeros((2, 1)), params)
    for name, g in grads.items():
        np.testing.assert_array_equal(g, np.zeros_like(g))


def test_init_determinism():
    a = nd.ParamStore(nd.conv_spec(4, hidden=8), seed=12)
    b = nd.ParamStore(nd.conv_spec(4, hidden=8), seed=12)
    for name in a.names():
        np.testing.assert_array_equal(a[name].data, b[name].data)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    spec = nd.conv_spec(6, hidden=7)
    params = nd.ParamStore(spec, seed=8)
    rng_state = {"note": "opaque", "counter": 12345678901234567890}
    path = tmp_path / "params.json"
    nd.save_params(path, spec, params, rng_state=rng_state, extra={"tag": "t"})
    spec2, params2, rng2, extra = nd.load_params(path)
    assert spec2 == spec
    assert rng2 == rng_state
    assert extra == {"tag": "t"}
    for name in params.names():
        np.testing.assert_array_equal(params2[name].data, params[name].data)
    # a second save produces identical bytes
    path2 = tmp_path / "params2.json"
    nd.save_params(path2, spec2, params2, rng_state=rng2, extra=extra)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_nonfinite(tmp_path):
    spec = nd.dense_spec(2, hidden=2, depth=1)
    params = nd.ParamStore(spec, seed=0)
    params["L0.w"].data[0, 0] = np.nan
    with pytest.raises(ValidationError, match="non-finite"):
        nd.save_params(tmp_path / "bad.json", spec, params)
