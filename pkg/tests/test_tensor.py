"""Autodiff core: op-level gradient exactness against finite differences."""

import numpy as np
import pytest

from wiae.errors import ValidationError
from wiae.ndiff import tensor as td


def central_diff(f, x, i, step=1e-6):
    xp = x.copy()
    xp.flat[i] += step
    xm = x.copy()
    xm.flat[i] -= step
    return (f(xp) - f(xm)) / (2.0 * step)


def check_grad(build, x, n_checks=6, rtol=1e-6, seed=0):
    """Compare reverse-mode gradient of scalar build(x) with central differences."""
    leaf = td.Tensor(x, requires_grad=True)
    out = build(leaf)
    (g,) = td.grad(out, [leaf])
    rng = np.random.default_rng(seed)
    idx = rng.choice(x.size, size=min(n_checks, x.size), replace=False)
    for i in idx:
        fd = central_diff(lambda a: build(td.Tensor(a)).item(), x, i)
        assert g.data.flat[i] == pytest.approx(fd, rel=rtol, abs=1e-8)


RNG = np.random.default_rng(42)


@pytest.mark.parametrize(
    "name,build",
    [
        ("add", lambda a: td.tsum(td.add(td.mul(a, 2.0), 1.0))),
        ("sub", lambda a: td.tsum(td.sub(1.5, a))),
        ("mul", lambda a: td.tsum(td.mul(a, a))),
        ("div", lambda a: td.tsum(td.div(1.0, td.add(td.mul(a, a), 1.0)))),
        ("exp", lambda a: td.tsum(td.exp(a))),
        ("log", lambda a: td.tsum(td.log(td.add(td.mul(a, a), 0.5)))),
        ("sqrt", lambda a: td.tsum(td.sqrt(td.add(td.mul(a, a), 0.5)))),
        ("sigmoid", lambda a: td.tsum(td.sigmoid(a))),
        ("lrelu", lambda a: td.tsum(td.leaky_relu(a, 0.2))),
        ("mean", lambda a: td.tsum(td.tmean(td.mul(a, a), axis=0))),
        ("reshape", lambda a: td.tsum(td.square(td.reshape(a, (-1,))))),
        ("slice", lambda a: td.tsum(td.square(a[1:3]))),
    ],
)
def test_elementwise_grads(name, build):
    x = RNG.normal(size=6)
    check_grad(lambda a: build(a), x)


def test_matmul_grads():
    a0 = RNG.normal(size=(3, 4))
    b0 = RNG.normal(size=(4, 2))
    b = td.Tensor(b0)
    check_grad(lambda a: td.tsum(td.square(td.matmul(td.reshape(a, (3, 4)), b))), a0.ravel())


def test_broadcast_grads():
    x = RNG.normal(size=3)
    other = td.Tensor(RNG.normal(size=(5, 3)))
    check_grad(lambda a: td.tsum(td.mul(other, a)), x)


def test_unfold_fold_grads():
    x = RNG.normal(size=(2, 7, 2))
    w = td.Tensor(RNG.normal(size=(6, 1)))
    check_grad(
        lambda a: td.tsum(
            td.square(td.matmul(td.reshape(td.unfold_windows(a, 3), (-1, 6)), w))
        ),
        x,
    )


def test_pad_grads():
    x = RNG.normal(size=(2, 5, 1))
    check_grad(lambda a: td.tsum(td.square(td.pad_axis1(a, 3, 0))), x)


def test_unfold_contents():
    a = td.Tensor(np.arange(10, dtype=float).reshape(1, 10, 1))
    w = td.unfold_windows(a, 4)
    assert w.shape == (1, 7, 4)
    np.testing.assert_array_equal(w.data[0, 0], [0, 1, 2, 3])
    np.testing.assert_array_equal(w.data[0, 6], [6, 7, 8, 9])


def test_second_order_gradient_penalty_style():
    """Gradient-of-gradient matches finite differences of the inner-grad loss."""
    rng = np.random.default_rng(5)
    x = td.Tensor(rng.normal(size=(8, 4)))
    w0 = rng.normal(size=(4, 1))

    def penalty(w_arr):
        w = td.Tensor(w_arr, requires_grad=True)
        leaf = td.Tensor(x.data, requires_grad=True)
        score = td.matmul(td.leaky_relu(leaf, 0.2), w)
        (g,) = td.grad(td.tsum(score), [leaf], create_graph=True)
        norm = td.sqrt(td.add(td.tsum(td.square(g), axis=1), 1e-12))
        return td.tmean(td.square(td.sub(norm, 1.0))), w

    loss, w = penalty(w0)
    (gw,) = td.grad(loss, [w])
    for i in range(4):
        fd = central_diff(lambda arr: penalty(arr)[0].item(), w0, i)
        assert gw.data.flat[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_zero_output_gradient_gives_zero_grads():
    x = td.Tensor(RNG.normal(size=4), requires_grad=True)
    out = td.mul(x, 3.0)
    grads = td.backward(out, output_gradient=np.zeros(4))
    np.testing.assert_array_equal(grads[x].data, np.zeros(4))


def test_output_gradient_shape_mismatch():
    x = td.Tensor(np.ones(4), requires_grad=True)
    out = td.mul(x, 2.0)
    with pytest.raises(ValidationError):
        td.backward(out, output_gradient=np.ones(3))


def test_diamond_accumulation():
    x = td.Tensor(np.array([2.0]), requires_grad=True)
    y = td.mul(x, x)          # x^2
    z = td.add(y, td.mul(3.0, x))  # x^2 + 3x
    grads = td.backward(td.tsum(z))
    assert grads[x].data[0] == pytest.approx(2 * 2.0 + 3.0)


def test_no_grad_builds_no_tape():
    x = td.Tensor(np.ones(3), requires_grad=True)
    with td.no_grad():
        y = td.mul(x, 2.0)
    assert not y.requires_grad
    assert y._parents == ()


def test_grad_of_unreached_tensor_is_zero():
    x = td.Tensor(np.ones(2), requires_grad=True)
    other = td.Tensor(np.ones(2), requires_grad=True)
    out = td.tsum(td.mul(x, 2.0))
    g = td.grad(out, [other])[0]
    np.testing.assert_array_equal(g.data, np.zeros(2))


def test_determinism_bitwise():
    def run():
        rng = np.random.default_rng(11)
        a = td.Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        b = td.Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        out = td.tmean(td.square(td.sigmoid(td.matmul(a, b))))
        ga, gb = (g.data for g in td.grad(out, [a, b]))
        return out.item(), ga.copy(), gb.copy()

    o1, ga1, gb1 = run()
    o2, ga2, gb2 = run()
    assert o1 == o2
    np.testing.assert_array_equal(ga1, ga2)
    np.testing.assert_array_equal(gb1, gb2)
