"""Minimal differentiable-computation kernel (tape autodiff + networks)."""

from wiae.ndiff.net import (
    LayerSpec,
    NetworkSpec,
    ParamStore,
    backward,
    causal_conv1d,
    conv_spec,
    dense_spec,
    forward,
    load_params,
    save_params,
)
from wiae.ndiff.optim import Adam, Sgd, optimizer_step
from wiae.ndiff.tensor import Tensor, as_tensor, grad, no_grad

__all__ = [
    "Adam",
    "LayerSpec",
    "NetworkSpec",
    "ParamStore",
    "Sgd",
    "Tensor",
    "as_tensor",
    "backward",
    "causal_conv1d",
    "conv_spec",
    "dense_spec",
    "forward",
    "grad",
    "load_params",
    "no_grad",
    "optimizer_step",
    "save_params",
]
