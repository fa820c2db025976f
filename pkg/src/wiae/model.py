"""The finite-window causal innovations autoencoder.

The encoder G maps a series to a latent sequence with values in [0, 1]
(the innovations); the decoder H maps innovations back to the data scale.
Both read exactly k past samples plus the current one. In SIR mode the
decoder output is trained to match the input sample-by-sample; in WIR mode
only in distribution.

Naming note: the encoder is G and the decoder is H throughout, matching
the block diagrams; one displayed equation elsewhere swaps the two letters
and is treated as a typo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from wiae.errors import ValidationError
from wiae.ndiff import net as nd
from wiae.ndiff import tensor as td

MODES = ("SIR", "WIR")

MODEL_FORMAT = "wiae-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Normalization:
    """Affine min-max map from the training data range onto [-1, 1]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not np.isfinite(self.lo) or not np.isfinite(self.hi) or self.hi <= self.lo:
            raise ValidationError("normalization bounds must be finite with hi > lo")

    @staticmethod
    def fit(x):
        x = np.asarray(x, dtype=np.float64)
        lo, hi = float(np.min(x)), float(np.max(x))
        if hi == lo:
            hi = lo + 1.0
        return Normalization(lo, hi)

    def encode(self, x):
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.lo) / (self.hi - self.lo) - 1.0

    def decode(self, z):
        return (np.asarray(z, dtype=np.float64) + 1.0) * 0.5 * (self.hi - self.lo) + self.lo


class InnovationsSequence:
    """Latent sequence with values in [0, 1].

    ``pseudo`` distinguishes freshly sampled IID-uniform draws from
    sequences produced by an encoder.
    """

    def __init__(self, values, pseudo=False):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("innovations sequence must be 1-D")
        if not np.all(np.isfinite(values)):
            raise ValidationError("innovations sequence must be finite")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValidationError("innovations values must lie in [0, 1]")
        self.values = values
        self.pseudo = bool(pseudo)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


class WiaeModel:
    """Paired causal encoder/decoder with shared window size k."""

    def __init__(self, k, mode="WIR", hidden=48, pointwise_layers=2, conv_splits=2,
                 seed=0, normalization=None):
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if k < 0:
            raise ValidationError("k must be >= 0")
        self.k = int(k)
        self.mode = mode
        self.seed = int(seed)
        self.encoder_spec = nd.conv_spec(
            k, hidden=hidden, pointwise_layers=pointwise_layers,
            out_activation="sigmoid", conv_splits=conv_splits,
        )
        self.decoder_spec = nd.conv_spec(
            k, hidden=hidden, pointwise_layers=pointwise_layers,
            out_activation="linear", conv_splits=conv_splits,
        )
        self.encoder = nd.ParamStore(self.encoder_spec, seed=seed)
        self.decoder = nd.ParamStore(self.decoder_spec, seed=seed + 1)
        self.norm = normalization or Normalization(-1.0, 1.0)
        self.trained = False
        self._rng = np.random.default_rng(self.seed)

    # -- inference ---------------------------------------------------------

    def encode_sequence(self, x) -> InnovationsSequence:
        """Innovations of a series; v[t] depends only on x[max(0, t-k) .. t]."""
        x = self._check_series(x)
        z = self.norm.encode(x)
        with td.no_grad():
            v = nd.forward(self.encoder_spec, self.encoder, z, causal=True)
        return InnovationsSequence(v.data)

    def decode_sequence(self, v) -> np.ndarray:
        """Series reconstruction from innovations, on the data scale."""
        values = v.values if isinstance(v, InnovationsSequence) else np.asarray(v, dtype=np.float64)
        InnovationsSequence(values)  # range/finiteness validation
        with td.no_grad():
            z = nd.forward(self.decoder_spec, self.decoder, values, causal=True)
        return self.norm.decode(z.data)

    def reconstruct(self, x) -> np.ndarray:
        return self.decode_sequence(self.encode_sequence(x))

    def _check_series(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size < 1:
            raise ValidationError("series must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise ValidationError("series contains non-finite values")
        return x

    # -- persistence -------------------------------------------------------

    def save(self, path):
        blob = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "k": self.k,
            "mode": self.mode,
            "seed": self.seed,
            "trained": self.trained,
            "normalization": {"lo": self.norm.lo, "hi": self.norm.hi},
            "encoder": _store_blob(self.encoder_spec, self.encoder),
            "decoder": _store_blob(self.decoder_spec, self.decoder),
            "rng_state": _rng_state_blob(self._rng),
        }
        with open(path, "w") as fh:
            json.dump(blob, fh, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "WiaeModel":
        with open(path) as fh:
            blob = json.load(fh)
        if blob.get("format") != MODEL_FORMAT:
            raise ValidationError(f"not a model checkpoint: {path}")
        if blob.get("version") != MODEL_VERSION:
            raise ValidationError(f"unsupported model version {blob.get('version')}")
        model = WiaeModel.__new__(WiaeModel)
        model.k = int(blob["k"])
        model.mode = blob["mode"]
        model.seed = int(blob["seed"])
        model.trained = bool(blob["trained"])
        model.norm = Normalization(blob["normalization"]["lo"], blob["normalization"]["hi"])
        model.encoder_spec, model.encoder = _store_from_blob(blob["encoder"])
        model.decoder_spec, model.decoder = _store_from_blob(blob["decoder"])
        model._rng = np.random.default_rng(0)
        model._rng.bit_generator.state = _rng_state_from_blob(blob["rng_state"])
        return model


def _store_blob(spec, store):
    return {
        "spec": spec.to_dict(),
        "seed": store.seed,
        "params": {
            name: {"shape": list(store[name].data.shape), "data": store[name].data.ravel().tolist()}
            for name in store.names()
        },
    }


def _store_from_blob(blob):
    spec = nd.NetworkSpec.from_dict(blob["spec"])
    store = nd.ParamStore(spec, seed=blob["seed"])
    store.load_values(
        {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in blob["params"].items()
        }
    )
    return spec, store


def _rng_state_blob(rng):
    state = rng.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "state": str(state["state"]["state"]),
        "inc": str(state["state"]["inc"]),
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def _rng_state_from_blob(blob):
    return {
        "bit_generator": blob["bit_generator"],
        "state": {"state": int(blob["state"]), "inc": int(blob["inc"])},
        "has_uint32": blob["has_uint32"],
        "uinteger": blob["uinteger"],
    }
