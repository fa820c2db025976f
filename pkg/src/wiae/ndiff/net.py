"""Parameterized feedforward networks built from causal convolutions.

Two network forms are supported:

* ``conv`` networks slide over a sequence. Each layer is a causal 1-D
  convolution (kernel length 1 gives a pointwise channel mix), so the
  receptive field of the stack is ``1 + sum(kernel - 1)`` and must equal
  the declared input window.
* ``dense`` networks consume a fixed-length window as a flat vector
  (used for the adversarial critics, which score one window at a time).

Weights for a conv layer with kernel length K and fan_in channels are
stored as a ``(K * fan_in, fan_out)`` matrix applied to unfolded windows;
row ``j * fan_in + c`` multiplies the sample ``K - 1 - j`` steps in the
past of channel ``c`` (row 0 is the oldest tap).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from wiae.errors import ValidationError
from wiae.ndiff import tensor as td

ACTIVATIONS = ("linear", "lrelu", "sigmoid")
LEAKY_SLOPE = 0.2

CHECKPOINT_FORMAT = "wiae-params"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv" | "dense"
    fan_in: int
    fan_out: int
    kernel: int = 1
    activation: str = "linear"

    def validate(self):
        if self.kind not in ("conv", "dense"):
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValidationError("layer fan-in/fan-out must be positive")
        if self.kernel < 1:
            raise ValidationError("kernel length must be positive")
        if self.kind == "dense" and self.kernel != 1:
            raise ValidationError("dense layers have no kernel dimension")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    window: int          # receptive field, k + 1
    out_arity: int = 1

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("network needs at least one layer")
        kinds = {layer.kind for layer in self.layers}
        if len(kinds) > 1:
            raise ValidationError("cannot mix conv and dense layers in one network")
        for layer in self.layers:
            layer.validate()
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.fan_in != prev.fan_out:
                raise ValidationError(
                    f"layer fan mismatch: {prev.fan_out} -> {nxt.fan_in}"
                )
        if self.form == "conv":
            rf = 1 + sum(layer.kernel - 1 for layer in self.layers)
            if rf != self.window:
                raise ValidationError(
                    f"receptive field {rf} does not match declared window {self.window}"
                )
            if self.layers[0].fan_in != 1:
                raise ValidationError("conv networks read a single input channel")
        else:
            if self.layers[0].fan_in != self.window:
                raise ValidationError("first dense layer must consume the full window")
        if self.layers[-1].fan_out != self.out_arity:
            raise ValidationError("last layer fan-out must equal the output arity")

    @property
    def form(self):
        return self.layers[0].kind

    def to_dict(self):
        return {
            "window": self.window,
            "out_arity": self.out_arity,
            "layers": [
                {
                    "kind": l.kind,
                    "fan_in": l.fan_in,
                    "fan_out": l.fan_out,
                    "kernel": l.kernel,
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }

    @staticmethod
    def from_dict(d):
        layers = tuple(LayerSpec(**entry) for entry in d["layers"])
        return NetworkSpec(layers=layers, window=d["window"], out_arity=d["out_arity"])


def conv_spec(k, hidden=48, pointwise_layers=2, out_activation="linear", conv_splits=2):
    """Causal sequence network with receptive field exactly ``k + 1``.

    The k lags are split across ``conv_splits`` stacked kernels (deeper
    temporal composition trains better than one wide tap for k >= 4),
    followed by pointwise channel-mixing layers.
    """
    if k < 0:
        raise ValidationError("k must be >= 0")
    splits = max(1, min(conv_splits, k if k > 0 else 1))
    base, rem = (divmod(k, splits) if k > 0 else (0, 0))
    taps = [base + (1 if i < rem else 0) for i in range(splits)]
    layers = []
    fan_in = 1
    for t in taps:
        layers.append(LayerSpec("conv", fan_in, hidden, kernel=t + 1, activation="lrelu"))
        fan_in = hidden
    for _ in range(pointwise_layers):
        layers.append(LayerSpec("conv", fan_in, hidden, kernel=1, activation="lrelu"))
        fan_in = hidden
    layers.append(LayerSpec("conv", fan_in, 1, kernel=1, activation=out_activation))
    return NetworkSpec(layers=tuple(layers), window=k + 1, out_arity=1)


def dense_spec(window, hidden=64, depth=3):
    """Window-scoring MLP (critic): window -> hidden x depth -> scalar."""
    layers = [LayerSpec("dense", window, hidden, activation="lrelu")]
    for _ in range(depth - 1):
        layers.append(LayerSpec("dense", hidden, hidden, activation="lrelu"))
    layers.append(LayerSpec("dense", hidden, 1, activation="linear"))
    return NetworkSpec(layers=tuple(layers), window=window, out_arity=1)


class ParamStore:
    """Named parameter tensors for one network.

    Shapes are fixed by the spec at construction; values change only
    through optimizer steps (or checkpoint loads, which must match shapes).
    """

    def __init__(self, spec: NetworkSpec, seed=0):
        self.spec = spec
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self._params: dict[str, td.Tensor] = {}
        for i, layer in enumerate(spec.layers):
            rows = layer.kernel * layer.fan_in
            scale = 1.0 / np.sqrt(rows)
            w = rng.uniform(-scale, scale, size=(rows, layer.fan_out))
            b = np.zeros(layer.fan_out)
            self._params[f"L{i}.w"] = td.Tensor(w, requires_grad=True)
            self._params[f"L{i}.b"] = td.Tensor(b, requires_grad=True)

    def __getitem__(self, name):
        return self._params[name]

    def names(self):
        return list(self._params)

    def tensors(self):
        return list(self._params.values())

    def values(self):
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_values(self, values):
        for name, t in self._params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValidationError(f"shape mismatch for parameter {name}")
            t.data = arr.copy()

    def n_params(self):
        return sum(t.size for t in self._params.values())


def _apply_activation(x, activation):
    if activation == "linear":
        return x
    if activation == "lrelu":
        return td.leaky_relu(x, LEAKY_SLOPE)
    if activation == "sigmoid":
        return td.sigmoid(x)
    raise ValidationError(f"unknown activation {activation!r}")


def forward(spec, params, x, causal=True):
    """Run the network; returns the output tensor, which doubles as the tape.

    conv form: input (B, L, 1) tensor/array, or a 1-D sequence. With
    ``causal`` the output keeps length L using zero pre-history padding;
    without it only positions with a full receptive field are produced
    (length L - window + 1).

    dense form: input (B, window) or (window,).
    """
    x = td.as_tensor(x)
    if spec.form == "dense":
        squeeze = x.ndim == 1
        if squeeze:
            x = td.reshape(x, (1, x.shape[0]))
        if x.shape[1] != spec.window:
            raise ValidationError(
                f"input width {x.shape[1]} does not match window {spec.window}"
            )
        h = x
        for i, layer in enumerate(spec.layers):
            h = td.add(td.matmul(h, params[f"L{i}.w"]), params[f"L{i}.b"])
            h = _apply_activation(h, layer.activation)
        if squeeze:
            h = td.reshape(h, (h.shape[1],))
        return h

    squeeze = x.ndim == 1
    if squeeze:
        x = td.reshape(x, (1, x.shape[0], 1))
    if x.ndim != 3 or x.shape[2] != spec.layers[0].fan_in:
        raise ValidationError(f"conv input must be (B, L, {spec.layers[0].fan_in})")
    if x.shape[1] < 1:
        raise ValidationError("empty sequence")
    if not causal and x.shape[1] < spec.window:
        raise ValidationError(
            f"sequence length {x.shape[1]} shorter than receptive field {spec.window}"
        )
    h = x
    for i, layer in enumerate(spec.layers):
        if causal and layer.kernel > 1:
            h = td.pad_axis1(h, layer.kernel - 1, 0)
        b, length, ch = h.shape
        if layer.kernel > 1:
            w = td.unfold_windows(h, layer.kernel)
        else:
            w = h
        p = w.shape[1]
        flat = td.reshape(w, (b * p, layer.kernel * ch))
        out = td.add(td.matmul(flat, params[f"L{i}.w"]), params[f"L{i}.b"])
        h = td.reshape(out, (b, p, layer.fan_out))
        h = _apply_activation(h, layer.activation)
    if squeeze:
        h = td.reshape(h, (h.shape[1],))
    return h


def backward(output, output_gradient, params):
    """Exact parameter gradients of ``sum(output * output_gradient)``.

    ``output`` is the tensor returned by :func:`forward` (the tape); the
    result is a dict aligned with the parameter store.
    """
    grads = td.backward(output, output_gradient=output_gradient)
    return {
        name: grads[t].data if t in grads else np.zeros(t.shape)
        for name, t in ((n, params[n]) for n in params.names())
    }


def causal_conv1d(x, kernel, bias=0.0):
    """Causal scalar convolution: out[t] = bias + sum_j kernel[j] * x[t-j].

    Samples before t = 0 are treated as zeros. This is the primitive the
    conv networks are built from, specialized to one channel.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError("empty sequence")
    if kernel.ndim != 1 or kernel.size == 0:
        raise ValidationError("kernel must be a non-empty 1-D array")
    k = kernel.size - 1
    spec = NetworkSpec(
        layers=(LayerSpec("conv", 1, 1, kernel=k + 1, activation="linear"),),
        window=k + 1,
    )
    params = ParamStore(spec, seed=0)
    # kernel[j] weights the sample j steps back; unfolded rows are oldest-first
    params.load_values({"L0.w": kernel[::-1].reshape(k + 1, 1), "L0.b": np.array([bias])})
    with td.no_grad():
        out = forward(spec, params, x, causal=True)
    return out.data


def save_params(path, spec, params, rng_state=None, extra=None):
    """Checkpoint container: spec + flat parameter arrays + RNG state.

    Uses JSON with full-precision floats (Python round-trips float64
    exactly through repr), so save -> load is bit-exact.
    """
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": spec.to_dict(),
        "seed": params.seed,
        "params": {
            name: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
            for name, t in ((n, params[n]) for n in params.names())
        },
        "rng_state": rng_state,
        "extra": extra or {},
    }
    for name, entry in blob["params"].items():
        if not all(np.isfinite(entry["data"])):
            raise ValidationError(f"non-finite parameter {name} cannot be checkpointed")
    with open(path, "w") as fh:
        json.dump(blob, fh, sort_keys=True)
        fh.write("\n")


def load_params(path):
    """Inverse of :func:`save_params`; returns (spec, store, rng_state, extra)."""
    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValidationError(f"not a parameter checkpoint: {path}")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {blob.get('version')}")
    spec = NetworkSpec.from_dict(blob["spec"])
    store = ParamStore(spec, seed=blob["seed"])
    store.load_values(
        {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in blob["params"].items()
        }
    )
    return spec, store, blob.get("rng_state"), blob.get("extra", {})
