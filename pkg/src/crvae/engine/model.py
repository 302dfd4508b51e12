"""The complex recurrent VAE and its feed-forward baseline.

Sequences are time-major: (T, step_dim) or (T, B, step_dim). A step is
`frames_per_step` consecutive spectrogram frames concatenated.
"""

from collections import OrderedDict
from dataclasses import replace
from typing import TYPE_CHECKING

import numpy as np

from ..core.exceptions import ConfigError, ShapeError
from ..schemas.config import Arch, ModelConfig
from .ctensor import CVector, RVector, project_unitary
from .cvae import (
    HeadCache,
    LatentPosterior,
    LossBreakdown,
    elbo_loss,
    kl_backward,
    posterior_heads_backward,
    posterior_heads_forward,
    reconstruction_backward,
    reparameterize,
    reparameterize_backward,
)
from .layers import (
    DenseParams,
    GruParams,
    ModReluParams,
    dense_backward,
    dense_forward,
    gru_sequence_backward,
    gru_sequence_forward,
    init_dense,
    init_gru,
    init_modrelu,
    modrelu,
    modrelu_backward,
)

if TYPE_CHECKING:
    from ..audio.dsp import Spectrogram

LayerParams = GruParams | DenseParams | ModReluParams
Grads = dict[str, np.ndarray]

RECURRENT_LAYERS = ("enc0", "enc1", "dec0", "dec1")


def layer_shapes(config: ModelConfig) -> list[tuple[str, str, int, int]]:
    """(name, kind, n_in, n_out) for every layer, in parameter order."""
    step, units, latent = config.step_dim, config.gru_units, config.latent_dim
    heads = [(name, "dense", units, latent) for name in ("head_mu", "head_s", "head_delta")]
    if config.arch == Arch.RECURRENT:
        return [
            ("enc0", "gru", step, units),
            ("enc1", "gru", units, units),
            *heads,
            ("dec0", "gru", latent, units),
            ("dec1", "gru", units, units),
            ("head_out", "dense", units, step),
        ]
    return [
        ("enc0", "dense", step, units),
        ("enc0_act", "modrelu", units, units),
        *heads,
        ("dec0", "dense", latent, units),
        ("dec0_act", "modrelu", units, units),
        ("head_out", "dense", units, step),
    ]


def frames_to_steps(frames: CVector, config: ModelConfig) -> CVector:
    """Group (T, input_dim) frames into (ceil(T / k), k·input_dim) steps, zero-padding the tail."""
    k, dim = config.frames_per_step, config.input_dim
    if frames.ndim != 2 or frames.shape[1] != dim:
        raise ShapeError(f"spectrogram must have {dim} bins per frame, got shape {frames.shape}")
    pad = (-frames.shape[0]) % k
    padded = np.concatenate([frames, np.zeros((pad, dim), dtype=np.complex128)]) if pad else frames
    return padded.reshape(-1, k * dim)


def steps_to_frames(steps: CVector, n_frames: int, config: ModelConfig) -> CVector:
    return steps.reshape(-1, config.input_dim)[:n_frames]


def count_parameters(config: ModelConfig) -> int:
    """Real scalars in the model: complex entries count twice, modReLU offsets once."""
    total = 0
    for _, kind, n_in, n_out in layer_shapes(config):
        if kind == "gru":
            total += 2 * (3 * n_out * n_out + 3 * n_out * n_in + 3 * n_out) + n_out
        elif kind == "dense":
            total += 2 * (n_out * n_in + n_out)
        else:
            total += n_out
    return total


class CrvaeModel:
    def __init__(self, config: ModelConfig, layers: "OrderedDict[str, LayerParams]") -> None:
        self.config = config
        self.layers = layers

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "CrvaeModel":
        layers: OrderedDict[str, LayerParams] = OrderedDict()
        for name, kind, n_in, n_out in layer_shapes(config):
            if kind == "gru":
                layers[name] = init_gru(n_in, n_out, rng, constrain_all=config.constrain_all_recurrences)
            elif kind == "dense":
                layers[name] = init_dense(n_in, n_out, rng)
            else:
                layers[name] = init_modrelu(n_out)
        return cls(config, layers)

    # ── parameters ────────────────────────────────────────────────────────────

    def named_parameters(self) -> "OrderedDict[str, np.ndarray]":
        named: OrderedDict[str, np.ndarray] = OrderedDict()
        for layer_name, params in self.layers.items():
            for name, tensor in params.named().items():
                named[f"{layer_name}.{name}"] = tensor
        return named

    def num_parameters(self) -> int:
        return sum(t.size * (2 if np.iscomplexobj(t) else 1) for t in self.named_parameters().values())

    def constrained_names(self) -> list[str]:
        if self.config.arch != Arch.RECURRENT:
            return []
        matrices = ("W", "W_r", "W_z") if self.config.constrain_all_recurrences else ("W",)
        return [f"{layer}.{matrix}" for layer in RECURRENT_LAYERS for matrix in matrices]

    def project_constrained(self) -> None:
        named = self.named_parameters()
        for name in self.constrained_names():
            named[name][...] = project_unitary(named[name])

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        """Copy tensors into the model in place; names and shapes must match exactly."""
        named = self.named_parameters()
        missing = sorted(set(named) - set(tensors))
        unexpected = sorted(set(tensors) - set(named))
        if missing or unexpected:
            raise ConfigError(f"checkpoint does not match model: missing {missing}, unexpected {unexpected}")
        for name, tensor in named.items():
            if tensors[name].shape != tensor.shape:
                raise ConfigError(
                    f"checkpoint tensor {name} has shape {tensors[name].shape}, model expects {tensor.shape}"
                )
            tensor[...] = tensors[name].real if not np.iscomplexobj(tensor) else tensors[name]

    # ── encoder ───────────────────────────────────────────────────────────────

    def _check_input(self, x_seq: CVector, dim: int, what: str) -> None:
        if x_seq.ndim not in (2, 3) or x_seq.shape[-1] != dim:
            raise ShapeError(f"{what} must be (T, {dim}) or (T, B, {dim}), got {x_seq.shape}")

    def _encode_forward(self, x_seq: CVector) -> tuple[LatentPosterior, list, HeadCache]:
        self._check_input(x_seq, self.config.step_dim, "encoder input")
        layers = self.layers
        if self.config.arch == Arch.RECURRENT:
            h0 = np.zeros((*x_seq.shape[1:-1], self.config.gru_units), dtype=np.complex128)
            states0, caches0 = gru_sequence_forward(layers["enc0"], h0, x_seq)
            states1, caches1 = gru_sequence_forward(layers["enc1"], h0, states0)
            encoder: list = [caches0, caches1]
            top = states1
        else:
            pre = dense_forward(layers["enc0"], x_seq)
            top = modrelu(pre, layers["enc0_act"].b)
            encoder = [pre]
        q, heads = posterior_heads_forward(layers["head_mu"], layers["head_s"], layers["head_delta"], top)
        return q, encoder, heads

    def encode(self, x_seq: CVector) -> LatentPosterior:
        """Per-step posterior parameters, each with the leading shape of `x_seq`."""
        q, _, _ = self._encode_forward(x_seq)
        return q

    def _encode_backward(self, x_seq: CVector, encoder: list, heads: HeadCache, g_q: tuple) -> Grads:
        layers = self.layers
        g_top, head_grads = posterior_heads_backward(
            layers["head_mu"], layers["head_s"], layers["head_delta"], heads, *g_q
        )
        grads: Grads = {}
        for head, key in (("head_mu", "mu"), ("head_s", "s"), ("head_delta", "delta")):
            grads.update(_prefixed(head, head_grads[key]))
        if self.config.arch == Arch.RECURRENT:
            caches0, caches1 = encoder
            _, g_states0, g1 = gru_sequence_backward(layers["enc1"], caches1, g_top)
            _, _, g0 = gru_sequence_backward(layers["enc0"], caches0, g_states0)
            grads.update(_prefixed("enc0", g0))
            grads.update(_prefixed("enc1", g1))
        else:
            (pre,) = encoder
            g_pre, g_b = modrelu_backward(pre, layers["enc0_act"].b, g_top)
            _, g0 = dense_backward(layers["enc0"], x_seq, g_pre)
            grads.update(_prefixed("enc0", g0))
            grads["enc0_act.b"] = g_b
        return grads

    # ── decoder ───────────────────────────────────────────────────────────────

    def _decode_forward(self, z_seq: CVector) -> tuple[CVector, list]:
        self._check_input(z_seq, self.config.latent_dim, "decoder input")
        layers = self.layers
        if self.config.arch == Arch.RECURRENT:
            h0 = np.zeros((*z_seq.shape[1:-1], self.config.gru_units), dtype=np.complex128)
            states0, caches0 = gru_sequence_forward(layers["dec0"], h0, z_seq)
            states1, caches1 = gru_sequence_forward(layers["dec1"], h0, states0)
            return dense_forward(layers["head_out"], states1), [caches0, caches1, states1]
        pre = dense_forward(layers["dec0"], z_seq)
        hidden = modrelu(pre, layers["dec0_act"].b)
        return dense_forward(layers["head_out"], hidden), [pre, hidden]

    def decode(self, z_seq: CVector) -> CVector:
        xhat, _ = self._decode_forward(z_seq)
        return xhat

    def _decode_backward(self, z_seq: CVector, decoder: list, g_xhat: CVector) -> tuple[CVector, Grads]:
        layers = self.layers
        grads: Grads = {}
        if self.config.arch == Arch.RECURRENT:
            caches0, caches1, states1 = decoder
            g_states1, g_out = dense_backward(layers["head_out"], states1, g_xhat)
            _, g_states0, g1 = gru_sequence_backward(layers["dec1"], caches1, g_states1)
            _, g_z, g0 = gru_sequence_backward(layers["dec0"], caches0, g_states0)
            grads.update(_prefixed("dec0", g0))
            grads.update(_prefixed("dec1", g1))
        else:
            pre, hidden = decoder
            g_hidden, g_out = dense_backward(layers["head_out"], hidden, g_xhat)
            g_pre, g_b = modrelu_backward(pre, layers["dec0_act"].b, g_hidden)
            g_z, g0 = dense_backward(layers["dec0"], z_seq, g_pre)
            grads.update(_prefixed("dec0", g0))
            grads["dec0_act.b"] = g_b
        grads.update(_prefixed("head_out", g_out))
        return g_z, grads

    # ── objective ─────────────────────────────────────────────────────────────

    def _normalizer(self, x_seq: CVector) -> int:
        return int(np.prod(x_seq.shape[:-1]))

    def forward_step(
        self, x_seq: CVector, rng: np.random.Generator, target: CVector | None = None
    ) -> tuple[CVector, LatentPosterior, LossBreakdown]:
        """Encode, sample one latent per step, decode and score against `target` (default: the input)."""
        target = x_seq if target is None else target
        q = self.encode(x_seq)
        eps_r = rng.standard_normal(q.mu.shape)
        eps_i = rng.standard_normal(q.mu.shape)
        xhat = self.decode(reparameterize(q, eps_r, eps_i))
        loss = elbo_loss(target, xhat, q, self.config.kl_weight, self.config.loss_mode)
        return xhat, q, loss.scaled(1.0 / self._normalizer(x_seq))

    def loss_and_grads(
        self, x_seq: CVector, target: CVector, eps_r: RVector, eps_i: RVector
    ) -> tuple[LossBreakdown, Grads]:
        """Mean per-step loss over the batch and its gradient for every named parameter."""
        if target.shape != x_seq.shape:
            raise ShapeError(f"target {target.shape} and input {x_seq.shape} differ in shape")
        q, encoder, heads = self._encode_forward(x_seq)
        z = reparameterize(q, eps_r, eps_i)
        xhat, decoder = self._decode_forward(z)
        scale = 1.0 / self._normalizer(x_seq)
        loss = elbo_loss(target, xhat, q, self.config.kl_weight, self.config.loss_mode).scaled(scale)

        g_xhat = scale * reconstruction_backward(target, xhat, self.config.loss_mode)
        g_z, grads = self._decode_backward(z, decoder, g_xhat)
        g_mu, g_sigma, g_delta = reparameterize_backward(q, eps_r, eps_i, g_z)
        k_mu, k_sigma, k_delta = kl_backward(q)
        weight = scale * self.config.kl_weight
        g_q = (g_mu + weight * k_mu, g_sigma + weight * k_sigma, g_delta + weight * k_delta)
        grads.update(self._encode_backward(x_seq, encoder, heads, g_q))
        return loss, OrderedDict((name, grads[name]) for name in self.named_parameters())

    # ── inference ─────────────────────────────────────────────────────────────

    def enhance(self, noisy: "Spectrogram") -> "Spectrogram":
        """Posterior-mean reconstruction of a whole utterance, state carried across all steps."""
        frames = np.asarray(noisy.frames, dtype=np.complex128)
        if frames.shape[0] == 0:
            return replace(noisy, frames=frames.copy())
        steps = frames_to_steps(frames * self.config.input_scale, self.config)
        xhat = self.decode(self.encode(steps).mu)
        enhanced = steps_to_frames(xhat, frames.shape[0], self.config) / self.config.input_scale
        return replace(noisy, frames=enhanced)


def _prefixed(layer: str, grads: dict[str, np.ndarray]) -> Grads:
    return {f"{layer}.{name}": value for name, value in grads.items()}
