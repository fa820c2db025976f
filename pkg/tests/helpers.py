"""Hand-configured models used across test modules."""

import numpy as np

from wiae.model import Normalization, WiaeModel
from wiae.ndiff import net as nd


def single_layer_model(k=0, enc_w=1.0, enc_b=0.0, enc_act="sigmoid",
                       dec_w=1.0, dec_b=0.0, norm=(-1.0, 1.0), mode="WIR"):
    """Autoencoder whose encoder/decoder are single scalar conv taps.

    With k = 0 both maps are memoryless: v = act(enc_w * z + enc_b) and
    xhat = denorm(dec_w * v + dec_b) where z is the normalized input.
    """
    model = WiaeModel(k=k, mode=mode, hidden=4, pointwise_layers=0, seed=0,
                      normalization=Normalization(*norm))
    enc_spec = nd.NetworkSpec(
        layers=(nd.LayerSpec("conv", 1, 1, kernel=k + 1, activation=enc_act),),
        window=k + 1,
    )
    dec_spec = nd.NetworkSpec(
        layers=(nd.LayerSpec("conv", 1, 1, kernel=k + 1, activation="linear"),),
        window=k + 1,
    )
    enc = nd.ParamStore(enc_spec, seed=0)
    dec = nd.ParamStore(dec_spec, seed=0)
    enc_kernel = np.zeros((k + 1, 1))
    enc_kernel[-1, 0] = enc_w  # newest tap
    dec_kernel = np.zeros((k + 1, 1))
    dec_kernel[-1, 0] = dec_w
    enc.load_values({"L0.w": enc_kernel, "L0.b": np.array([enc_b])})
    dec.load_values({"L0.w": dec_kernel, "L0.b": np.array([dec_b])})
    model.encoder_spec, model.encoder = enc_spec, enc
    model.decoder_spec, model.decoder = dec_spec, dec
    model.trained = True
    return model


def identity_autoencoder():
    """Exact identity on [0, 1]: v = x and reconstruct(x) = x bit-for-bit."""
    return single_layer_model(
        enc_w=0.5, enc_b=0.5, enc_act="linear", dec_w=2.0, dec_b=-1.0, norm=(0.0, 1.0)
    )


def passthrough_decoder_model(k=0):
    """Decoder emits its newest innovations value unchanged."""
    return single_layer_model(k=k, dec_w=1.0, dec_b=0.0, norm=(-1.0, 1.0))
