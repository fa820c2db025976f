"""Reverse-mode automatic differentiation over numpy float64 arrays.

A ``Tensor`` wraps an ndarray together with the recorded operation that
produced it, so the chain of tensors doubles as the gradient tape: walking
the parents backward and applying each stored vector-Jacobian product
yields exact gradients for every reachable leaf.

Every vjp is itself written in terms of Tensor operations. When
``backward`` runs with ``create_graph=True`` the produced gradients are
therefore differentiable again, which is what the Lipschitz gradient
penalty in the adversarial trainer needs (a loss term built from an inner
gradient).
"""

from __future__ import annotations

import contextlib

import numpy as np

from wiae.errors import ValidationError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """Node of the computation tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjps = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def backward(self, output_gradient=None):
        """Accumulate ``.grad`` on every reachable leaf tensor."""
        grads = backward(self, output_gradient=output_gradient)
        for t, g in grads.items():
            t.grad = g.data if t.grad is None else t.grad + g.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, vjps):
    """Create an interior tape node, folding to a constant when possible."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._vjps = tuple(vjps)
        return out
    return Tensor(data)


def _sum_to_shape(g, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = tsum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = tsum(g, axis=axes, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data + b.data,
        (a, b),
        (lambda u: _sum_to_shape(u, a.shape), lambda u: _sum_to_shape(u, b.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data - b.data,
        (a, b),
        (lambda u: _sum_to_shape(u, a.shape), lambda u: _sum_to_shape(neg(u), b.shape)),
    )


def neg(a):
    a = as_tensor(a)
    return _node(-a.data, (a,), (lambda u: neg(u),))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data * b.data,
        (a, b),
        (lambda u: _sum_to_shape(mul(u, b), a.shape), lambda u: _sum_to_shape(mul(u, a), b.shape)),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.data / b.data,
        (a, b),
        (
            lambda u: _sum_to_shape(div(u, b), a.shape),
            lambda u: _sum_to_shape(neg(div(mul(u, a), mul(b, b))), b.shape),
        ),
    )


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValidationError("matmul expects 2-D operands")
    return _node(
        a.data @ b.data,
        (a, b),
        (lambda u: matmul(u, transpose(b)), lambda u: matmul(transpose(a), u)),
    )


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    return _node(np.transpose(a.data, axes), (a,), (lambda u: transpose(u, inv),))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _node(a.data.reshape(shape), (a,), (lambda u: reshape(u, old),))


def broadcast_to(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _node(np.broadcast_to(a.data, shape).copy(), (a,), (lambda u: _sum_to_shape(u, old),))


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.shape

    def vjp(u):
        if axis is None:
            return broadcast_to(reshape(u, (1,) * len(shape)), shape)
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(ax % len(shape) for ax in axes)
        if not keepdims:
            kd_shape = tuple(1 if i in axes else s for i, s in enumerate(shape))
            u = reshape(u, kd_shape)
        return broadcast_to(u, shape)

    return _node(out_data, (a,), (vjp,))


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return div(tsum(a, axis=axis, keepdims=keepdims), float(n))


def square(a):
    a = as_tensor(a)
    return mul(a, a)


def sqrt(a):
    a = as_tensor(a)
    out = _node(np.sqrt(a.data), (a,), ())
    if out.requires_grad:
        out._vjps = (lambda u: div(u, mul(2.0, out)),)
    return out


def exp(a):
    a = as_tensor(a)
    out = _node(np.exp(a.data), (a,), ())
    if out.requires_grad:
        out._vjps = (lambda u: mul(u, out),)
    return out


def log(a):
    a = as_tensor(a)
    return _node(np.log(a.data), (a,), (lambda u: div(u, a),))


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    # numerically stable logistic
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = _node(data, (a,), ())
    if out.requires_grad:
        out._vjps = (lambda u: mul(u, mul(out, sub(1.0, out))),)
    return out


def leaky_relu(a, slope=0.2):
    a = as_tensor(a)
    data = np.where(a.data > 0.0, a.data, slope * a.data)
    # the mask is piecewise constant in the input, so treating it as a
    # constant in the vjp gives the a.e.-correct derivative at any order;
    # computed lazily so inference-only passes never build it
    cache = []

    def vjp(u):
        if not cache:
            cache.append(Tensor(np.where(a.data > 0.0, 1.0, slope)))
        return mul(u, cache[0])

    return _node(data, (a,), (vjp,))


def take(a, idx):
    """Basic (static) indexing; the vjp scatters into a zero array."""
    a = as_tensor(a)
    shape = a.shape

    def vjp(u):
        return _scatter(u, idx, shape)

    return _node(a.data[idx], (a,), (vjp,))


def _scatter(u, idx, shape):
    u = as_tensor(u)
    z = np.zeros(shape)
    z[idx] = u.data
    return _node(z, (u,), (lambda g: take(g, idx),))


def pad_axis1(a, before, after):
    """Zero-pad along axis 1 of a 3-D (batch, length, channels) tensor."""
    a = as_tensor(a)
    data = np.pad(a.data, ((0, 0), (before, after), (0, 0)))
    stop = data.shape[1] - after
    return _node(data, (a,), (lambda u: take(u, (slice(None), slice(before, stop), slice(None))),))


def unfold_windows(a, width):
    """Sliding windows along time: (B, L, C) -> (B, L-width+1, width*C).

    Window p collects samples p .. p+width-1, oldest first.
    """
    a = as_tensor(a)
    b, length, ch = a.shape
    if length < width:
        raise ValidationError(f"sequence length {length} shorter than window {width}")
    p = length - width + 1
    s0, s1, s2 = a.data.strides
    view = np.lib.stride_tricks.as_strided(a.data, (b, p, width, ch), (s0, s1, s1, s2))
    data = view.reshape(b, p, width * ch)

    def vjp(u):
        return _fold_windows(u, width, (b, length, ch))

    return _node(data, (a,), (vjp,))


def _fold_windows(u, width, out_shape):
    """Adjoint of ``unfold_windows``: overlap-add windows back in place."""
    u = as_tensor(u)
    b, length, ch = out_shape
    p = length - width + 1

    u4 = u.data.reshape(b, p, width, ch)
    z = np.zeros(out_shape)
    for k in range(width):
        z[:, k:k + p, :] += u4[:, :, k, :]

    return _node(z, (u,), (lambda g: unfold_windows(g, width),))


def backward(root, output_gradient=None, create_graph=False):
    """Run reverse-mode accumulation from ``root``.

    Returns a dict mapping every reachable leaf tensor (one that has
    ``requires_grad`` and no parents) to its gradient tensor. With
    ``create_graph`` the returned gradients stay connected to the tape and
    can be differentiated again.
    """
    root = as_tensor(root)
    if output_gradient is None:
        seed_data = np.ones_like(root.data)
    else:
        seed_data = np.asarray(output_gradient, dtype=np.float64)
        if seed_data.shape != root.data.shape:
            raise ValidationError(
                f"output gradient shape {seed_data.shape} does not match output {root.data.shape}"
            )
    return _accumulate(root, Tensor(seed_data), create_graph)


def grad(output, wrt, output_gradient=None, create_graph=False):
    """Gradients of ``output`` for an explicit list of tensors.

    Unlike :func:`backward` this also returns gradients for interior nodes
    listed in ``wrt``; intermediates that the output does not depend on get
    zero gradients.
    """
    output = as_tensor(output)
    if output_gradient is None:
        seed = Tensor(np.ones_like(output.data))
    else:
        seed = as_tensor(output_gradient)
        if seed.shape != output.shape:
            raise ValidationError(
                f"output gradient shape {seed.shape} does not match output {output.shape}"
            )
    acc = _accumulate(output, seed, create_graph, keep=set(id(t) for t in wrt))
    byid = {id(t): g for t, g in acc.items()}
    return [byid.get(id(t), Tensor(np.zeros(t.shape))) for t in wrt]


def _accumulate(root, seed, create_graph, keep=None):
    if not root.requires_grad:
        return {}

    # topological order over grad-requiring nodes
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    acc = {id(root): seed}
    out = {}
    for node in reversed(order):
        g = acc.pop(id(node), None)
        if g is None:
            continue
        if not create_graph:
            g = g.detach()
        if not node._parents:
            out[node] = g
            continue
        if keep is not None and id(node) in keep:
            out[node] = g
        for parent, vjp in zip(node._parents, node._vjps):
            if not parent.requires_grad:
                continue
            pg = vjp(g)
            prev = acc.get(id(parent))
            acc[id(parent)] = pg if prev is None else add(prev, pg)
    return out
