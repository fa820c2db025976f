"""Adversarial pretraining of the innovations autoencoder.

Training alternates between critic updates and generator updates. The
innovations critic scores length-(k+1) windows of the latent sequence
against IID-uniform windows; the decoding critic (WIR mode) scores decoded
windows against data windows. Both critics estimate a Wasserstein-1
distance through their score gap and are kept near 1-Lipschitz with a
gradient penalty. The generator (encoder + decoder) descends the weighted
objective

    L = e + lambda * eps

where e is the innovations-distance estimate and eps is either the
decoding-distance estimate (WIR) or the mean squared reconstruction error
(SIR).

Training examples are windows of ``window_len`` samples drawn uniformly at
random (with overlap) from the normalized series. Within each window the
networks run without pre-history padding, so only positions with a full
receptive field contribute; this is why ``window_len`` must cover three
receptive fields for WIR (encode, decode, then a full decoded window).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from wiae.errors import DivergenceError, ValidationError
from wiae.model import InnovationsSequence, Normalization, WiaeModel
from wiae.ndiff import net as nd
from wiae.ndiff import optim
from wiae.ndiff import tensor as td

SMOOTHING_WINDOW = 50


@dataclass(frozen=True)
class TrainConfig:
    mode: str | None = None      # None: adopt the model's mode
    lam: float = 1.0             # weight of the decoding term
    batch_size: int = 64
    window_len: int | None = None  # per-example window; None: minimal valid
    n_critic: int = 5
    gp_coef: float = 10.0        # Lipschitz gradient-penalty coefficient
    lr_generator: float = 1e-4
    lr_critic: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    max_epochs: int = 1
    steps_per_epoch: int | None = None  # None: one pass worth of windows
    selection_burnin: int = 200  # generator steps before best-state tracking starts
    critic_hidden: int = 64
    critic_depth: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.mode is not None and self.mode not in ("SIR", "WIR"):
            raise ValidationError("mode must be SIR or WIR")
        if self.lam <= 0:
            raise ValidationError("lambda must be positive")
        if self.batch_size < 1:
            raise ValidationError("batch size must be >= 1")
        if self.n_critic < 1:
            raise ValidationError("n_critic must be >= 1")
        if self.gp_coef < 0:
            raise ValidationError("gradient-penalty coefficient must be >= 0")
        if self.lr_generator <= 0 or self.lr_critic <= 0:
            raise ValidationError("learning rates must be positive")
        if self.max_epochs < 0:
            raise ValidationError("max_epochs must be >= 0")
        if self.selection_burnin < 0:
            raise ValidationError("selection_burnin must be >= 0")

    def resolved_window_len(self, k, mode):
        need = 3 * k + 1 if mode == "WIR" else 2 * k + 1
        if self.window_len is None:
            return need
        if self.window_len < need:
            raise ValidationError(
                f"window_len {self.window_len} too short for k={k} in {mode} mode "
                f"(minimum {need})"
            )
        return self.window_len

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(d):
        unknown = set(d) - set(TrainConfig.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown training config keys: {sorted(unknown)}")
        return TrainConfig(**d)


@dataclass
class CriticPair:
    """Adversarial discriminators; never part of an inference checkpoint."""

    innovations_spec: nd.NetworkSpec
    innovations: nd.ParamStore
    decoding_spec: nd.NetworkSpec | None = None
    decoding: nd.ParamStore | None = None

    @staticmethod
    def build(k, mode, hidden=64, depth=3, seed=0):
        ispec = nd.dense_spec(k + 1, hidden=hidden, depth=depth)
        pair = CriticPair(ispec, nd.ParamStore(ispec, seed=seed + 101))
        if mode == "WIR":
            dspec = nd.dense_spec(k + 1, hidden=hidden, depth=depth)
            pair.decoding_spec = dspec
            pair.decoding = nd.ParamStore(dspec, seed=seed + 202)
        return pair


@dataclass
class TrainReport:
    """Per-generator-step loss bookkeeping; one record per step."""

    steps: list = field(default_factory=list)
    e_loss: list = field(default_factory=list)
    eps_loss: list = field(default_factory=list)
    total_loss: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    wall_clock: list = field(default_factory=list)
    best_step: int | None = None

    def append(self, step, e, eps, total, gnorm, elapsed):
        self.steps.append(int(step))
        self.e_loss.append(float(e))
        self.eps_loss.append(float(eps))
        self.total_loss.append(float(total))
        self.grad_norm.append(float(gnorm))
        self.wall_clock.append(float(elapsed))

    def __len__(self):
        return len(self.steps)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("step,e_loss,eps_loss,total_loss,grad_norm\n")
            for i in range(len(self.steps)):
                fh.write(
                    f"{self.steps[i]},{self.e_loss[i]!r},{self.eps_loss[i]!r},"
                    f"{self.total_loss[i]!r},{self.grad_norm[i]!r}\n"
                )


def sample_uniform_noise(count, rng) -> InnovationsSequence:
    """IID U(0, 1) pseudo-innovations from a seedable generator."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    return InnovationsSequence(rng.random(count), pseudo=True)


def critic_loss(spec, params, real_batch, fake_batch, penalty_coef, rng):
    """WGAN-GP critic objective and its exact parameter gradients.

    loss = mean(critic(fake)) - mean(critic(real))
         + penalty_coef * mean((||grad critic(interp)|| - 1)^2)

    The penalty gradients require differentiating through the inner
    gradient, which the tape supports (create_graph).
    """
    real = np.asarray(real_batch, dtype=np.float64)
    fake = np.asarray(fake_batch, dtype=np.float64)
    if real.shape != fake.shape:
        raise ValidationError(f"batch shape mismatch: {real.shape} vs {fake.shape}")
    if real.ndim != 2:
        raise ValidationError("critic batches must be (batch, window)")

    b = real.shape[0]
    eps = rng.random((b, 1))
    # one batched forward over [real; fake; interpolates]
    stacked = td.Tensor(
        np.concatenate([real, fake, eps * real + (1.0 - eps) * fake]), requires_grad=True
    )
    scores = nd.forward(spec, params, stacked)
    base = td.sub(td.tmean(scores[b:2 * b]), td.tmean(scores[:b]))

    (g_all,) = td.grad(td.tsum(scores[2 * b:]), [stacked], create_graph=True)
    g = g_all[2 * b:]
    norm = td.sqrt(td.add(td.tsum(td.square(g), axis=1), 1e-12))
    penalty = td.tmean(td.square(td.sub(norm, 1.0)))

    loss = td.add(base, td.mul(penalty_coef, penalty))
    tensors = params.tensors()
    grads = td.grad(loss, tensors)
    grad_map = {name: grads[i].data for i, name in enumerate(params.names())}
    return loss.item(), grad_map, {"base": base.item(), "penalty": penalty.item()}


def generator_loss(model, critics, slices, uniform_batch, lam):
    """Generator objective L = e + lambda * eps with gradients for both nets.

    ``slices`` is a (batch, window_len) array of normalized series windows;
    ``uniform_batch`` the IID-uniform reference windows for the innovations
    critic. Critic parameters are treated as frozen (their gradients are
    simply not applied).
    """
    k = model.k
    slices = np.asarray(slices, dtype=np.float64)
    b, s = slices.shape
    x_in = td.Tensor(slices[:, :, None])
    v_seq = nd.forward(model.encoder_spec, model.encoder, x_in, causal=False)
    xhat_seq = nd.forward(model.decoder_spec, model.decoder, v_seq, causal=False)

    fake_v = td.reshape(v_seq[:, s - k - (k + 1): s - k, :], (b, k + 1))
    u = td.Tensor(np.asarray(uniform_batch, dtype=np.float64))
    e_term = td.sub(
        td.tmean(nd.forward(critics.innovations_spec, critics.innovations, u)),
        td.tmean(nd.forward(critics.innovations_spec, critics.innovations, fake_v)),
    )

    if model.mode == "WIR":
        fake_x = td.reshape(xhat_seq[:, s - 2 * k - (k + 1): s - 2 * k, :], (b, k + 1))
        real_x = td.Tensor(slices[:, -(k + 1):])
        eps_term = td.sub(
            td.tmean(nd.forward(critics.decoding_spec, critics.decoding, real_x)),
            td.tmean(nd.forward(critics.decoding_spec, critics.decoding, fake_x)),
        )
    else:
        target = td.Tensor(slices[:, 2 * k:])
        eps_term = td.tmean(td.square(td.sub(td.reshape(xhat_seq, (b, s - 2 * k)), target)))

    loss = td.add(e_term, td.mul(lam, eps_term))
    tensors = model.encoder.tensors() + model.decoder.tensors()
    grads = td.grad(loss, tensors)
    names = [("enc", n) for n in model.encoder.names()] + [("dec", n) for n in model.decoder.names()]
    enc_grads, dec_grads = {}, {}
    sq_sum = 0.0
    for (side, name), g in zip(names, grads):
        arr = g.data
        sq_sum += float(np.sum(arr * arr))
        (enc_grads if side == "enc" else dec_grads)[name] = arr
    return loss.item(), enc_grads, dec_grads, {
        "e": e_term.item(),
        "eps": eps_term.item(),
        "grad_norm": float(np.sqrt(sq_sum)),
    }


def _sample_slices(z, window_len, batch_size, rng):
    starts = rng.integers(0, z.size - window_len + 1, size=batch_size)
    return z[starts[:, None] + np.arange(window_len)]


def _fake_windows(model, slices):
    """Detached v- and xhat-windows for critic updates."""
    k = model.k
    b, s = slices.shape
    with td.no_grad():
        v_seq = nd.forward(model.encoder_spec, model.encoder, td.Tensor(slices[:, :, None]),
                           causal=False)
        xhat_seq = nd.forward(model.decoder_spec, model.decoder, v_seq, causal=False)
    v = v_seq.data[:, :, 0]
    xh = xhat_seq.data[:, :, 0]
    return v[:, -(k + 1):], xh[:, -(k + 1):] if xh.shape[1] >= k + 1 else None


def train(model: WiaeModel, series, config: TrainConfig):
    """Min-max pretraining loop.

    Runs ``n_critic`` critic updates per generator update and returns the
    parameter state with the best smoothed generator objective (min-max
    losses oscillate, so the last iterate is not reliable). Fully
    reproducible from (series, config, model seed).
    """
    mode = config.mode or model.mode
    if mode != model.mode:
        raise ValidationError(f"config mode {mode} conflicts with model mode {model.mode}")
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise ValidationError("training series must be 1-D")
    if not np.all(np.isfinite(series)):
        raise ValidationError("training series contains non-finite values")
    k = model.k
    window_len = config.resolved_window_len(k, mode)
    if series.size < 10 * (k + 1) or series.size < window_len:
        raise ValidationError(
            f"series too short for training: {series.size} samples "
            f"(need >= {max(10 * (k + 1), window_len)})"
        )

    model.norm = Normalization.fit(series)
    z = model.norm.encode(series)

    rng = np.random.default_rng(config.seed)
    critics = CriticPair.build(k, mode, hidden=config.critic_hidden,
                               depth=config.critic_depth, seed=config.seed)

    opt_gen_enc = optim.Adam(config.lr_generator, config.beta1, config.beta2)
    opt_gen_dec = optim.Adam(config.lr_generator, config.beta1, config.beta2)
    opt_ci = optim.Adam(config.lr_critic, config.beta1, config.beta2)
    opt_cd = optim.Adam(config.lr_critic, config.beta1, config.beta2)

    steps_per_epoch = config.steps_per_epoch
    if steps_per_epoch is None:
        steps_per_epoch = max(1, (series.size - window_len + 1) // config.batch_size)
    total_steps = config.max_epochs * steps_per_epoch

    report = TrainReport()
    # the smoothed objective is only comparable between iterates once the
    # critics have burned in; before that the distance estimates read ~0 and
    # would always "win". If the run is shorter than the burn-in, fall back
    # to the last iterate.
    best = {"smoothed": np.inf, "enc": None, "dec": None, "step": 0}
    recent = []

    t0 = time.perf_counter()
    try:
        for step in range(1, total_steps + 1):
            for _ in range(config.n_critic):
                slices = _sample_slices(z, window_len, config.batch_size, rng)
                fake_v, fake_x = _fake_windows(model, slices)
                real_u = rng.random((config.batch_size, k + 1))
                _, gi, _ = critic_loss(critics.innovations_spec, critics.innovations,
                                       real_u, fake_v, config.gp_coef, rng)
                opt_ci.step(critics.innovations, gi)
                if mode == "WIR":
                    real_x = slices[:, -(k + 1):]
                    _, gd, _ = critic_loss(critics.decoding_spec, critics.decoding,
                                           real_x, fake_x, config.gp_coef, rng)
                    opt_cd.step(critics.decoding, gd)

            slices = _sample_slices(z, window_len, config.batch_size, rng)
            u = rng.random((config.batch_size, k + 1))
            loss, enc_g, dec_g, parts = generator_loss(model, critics, slices, u, config.lam)
            if not np.isfinite(loss):
                raise DivergenceError("divergence detected: non-finite generator loss",
                                      step=step, report=report)
            opt_gen_enc.step(model.encoder, enc_g)
            opt_gen_dec.step(model.decoder, dec_g)

            report.append(step, parts["e"], parts["eps"], loss, parts["grad_norm"],
                          time.perf_counter() - t0)
            recent.append(loss)
            if len(recent) > SMOOTHING_WINDOW:
                recent.pop(0)
            smoothed = float(np.mean(recent))
            if step > config.selection_burnin and smoothed < best["smoothed"]:
                best = {"smoothed": smoothed, "enc": model.encoder.values(),
                        "dec": model.decoder.values(), "step": step}
    except DivergenceError as err:
        err.report = report
        raise

    if best["enc"] is not None:
        model.encoder.load_values(best["enc"])
        model.decoder.load_values(best["dec"])
        report.best_step = best["step"]
    else:
        report.best_step = total_steps
    model.trained = True
    return model, report
