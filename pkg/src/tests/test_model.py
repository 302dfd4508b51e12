"""Tests for the recurrent VAE and its feed-forward baseline."""

import numpy as np
import pytest

from crvae.audio.dsp import Spectrogram
from crvae.core.exceptions import ConfigError, ShapeError
from crvae.engine.ctensor import unitarity_error
from crvae.engine.model import CrvaeModel, count_parameters, frames_to_steps, layer_shapes, steps_to_frames
from crvae.schemas.config import Arch, ModelConfig

from .helpers import cnormal


@pytest.fixture
def tiny() -> ModelConfig:
    return ModelConfig(input_dim=3, frames_per_step=2, gru_units=4, latent_dim=2)


@pytest.fixture
def model(tiny, rng) -> CrvaeModel:
    return CrvaeModel.initialize(tiny, rng)


# ── structure ─────────────────────────────────────────────────────────────────


def test_default_model_size():
    """200 bins, 2 frames per step, 512 units and 512 latent dimensions."""
    assert count_parameters(ModelConfig()) == 14_239_520


@pytest.mark.parametrize("arch", list(Arch))
def test_closed_form_count_matches_tensors(tiny, rng, arch):
    config = tiny.model_copy(update={"arch": arch})
    assert CrvaeModel.initialize(config, rng).num_parameters() == count_parameters(config)


def test_parameter_names_follow_layer_order(model):
    names = list(model.named_parameters())
    assert names[0] == "enc0.W"
    assert names[-1] == "head_out.b"
    assert [shape[0] for shape in layer_shapes(model.config)] == list(model.layers)


def test_feedforward_layout(tiny, rng):
    ff = CrvaeModel.initialize(tiny.model_copy(update={"arch": Arch.FEEDFORWARD}), rng)
    assert list(ff.layers) == ["enc0", "enc0_act", "head_mu", "head_s", "head_delta", "dec0", "dec0_act", "head_out"]
    assert ff.constrained_names() == []


def test_constrained_matrices_are_unitary(model, rng):
    assert model.constrained_names() == ["enc0.W", "enc1.W", "dec0.W", "dec1.W"]
    named = model.named_parameters()
    for name in model.constrained_names():
        named[name][...] += 0.1 * cnormal(rng, *named[name].shape)
    model.project_constrained()
    assert max(unitarity_error(named[name]) for name in model.constrained_names()) <= 1e-10


def test_constrain_all_adds_gate_matrices(tiny, rng):
    m = CrvaeModel.initialize(tiny.model_copy(update={"constrain_all_recurrences": True}), rng)
    assert "enc0.W_r" in m.constrained_names() and "dec1.W_z" in m.constrained_names()


def test_load_state_requires_matching_names_and_shapes(model, tiny, rng):
    other = CrvaeModel.initialize(tiny, np.random.default_rng(99))
    model.load_state(other.named_parameters())
    for (name, a), b in zip(model.named_parameters().items(), other.named_parameters().values(), strict=True):
        np.testing.assert_array_equal(a, b, err_msg=name)

    state = dict(other.named_parameters())
    state.pop("enc0.W")
    with pytest.raises(ConfigError):
        model.load_state(state)
    bigger = CrvaeModel.initialize(tiny.model_copy(update={"gru_units": 5}), rng)
    with pytest.raises(ConfigError):
        model.load_state(bigger.named_parameters())


# ── steps ─────────────────────────────────────────────────────────────────────


def test_frames_are_paired_into_steps(tiny, rng):
    frames = cnormal(rng, 5, 3)
    steps = frames_to_steps(frames, tiny)
    assert steps.shape == (3, 6)
    np.testing.assert_array_equal(steps[0], np.concatenate([frames[0], frames[1]]))
    np.testing.assert_array_equal(steps[2, 3:], 0)
    np.testing.assert_array_equal(steps_to_frames(steps, 5, tiny), frames)


def test_frames_must_have_configured_width(tiny, rng):
    with pytest.raises(ShapeError):
        frames_to_steps(cnormal(rng, 4, 2), tiny)


# ── forward passes ────────────────────────────────────────────────────────────


def test_forward_shapes_single_and_batched(model, rng):
    x = cnormal(rng, 7, 6)
    xhat, q, loss = model.forward_step(x, rng)
    assert xhat.shape == x.shape and q.mu.shape == (7, 2)
    assert np.isfinite(loss.total)

    xb = cnormal(rng, 7, 3, 6)
    xhat, q, _ = model.forward_step(xb, rng, target=xb)
    assert xhat.shape == xb.shape and q.sigma.shape == (7, 3, 2)


def test_batch_entries_do_not_interact(model, rng):
    xb = cnormal(rng, 5, 2, 6)
    q = model.encode(xb)
    np.testing.assert_allclose(model.encode(xb[:, 1]).mu, q.mu[:, 1], atol=1e-14)


@pytest.mark.parametrize("arch", list(Arch))
def test_outputs_depend_only_on_past_steps(tiny, rng, arch):
    model = CrvaeModel.initialize(tiny.model_copy(update={"arch": arch}), rng)
    x, z = cnormal(rng, 9, 6), cnormal(rng, 9, 2)
    k = 4
    x_alt, z_alt = x.copy(), z.copy()
    x_alt[k:], z_alt[k:] = cnormal(rng, 5, 6), cnormal(rng, 5, 2)

    q, q_alt = model.encode(x), model.encode(x_alt)
    np.testing.assert_allclose(q.mu[:k], q_alt.mu[:k], atol=1e-13)
    np.testing.assert_allclose(q.sigma[:k], q_alt.sigma[:k], atol=1e-13)
    np.testing.assert_allclose(q.delta[:k], q_alt.delta[:k], atol=1e-13)
    np.testing.assert_allclose(model.decode(z)[:k], model.decode(z_alt)[:k], atol=1e-13)
    assert not np.allclose(q.mu[k:], q_alt.mu[k:])


def test_wrong_input_width_raises(model, rng):
    with pytest.raises(ShapeError):
        model.encode(cnormal(rng, 4, 5))


def test_loss_and_grads_cover_every_parameter(model, rng):
    x, target = cnormal(rng, 4, 2, 6), cnormal(rng, 4, 2, 6)
    eps_r, eps_i = rng.standard_normal((4, 2, 2)), rng.standard_normal((4, 2, 2))
    loss, grads = model.loss_and_grads(x, target, eps_r, eps_i)
    assert list(grads) == list(model.named_parameters())
    for name, tensor in model.named_parameters().items():
        assert grads[name].shape == tensor.shape, name
        assert np.all(np.isfinite(grads[name])), name
    assert loss.total == pytest.approx(loss.rec_real + loss.rec_imag + loss.rec_mag + loss.kl)


def test_enhance_keeps_spectrogram_geometry(model, rng):
    noisy = Spectrogram(frames=cnormal(rng, 5, 3), frame_len=6, hop=2, window="hann", n_samples=12)
    enhanced = model.enhance(noisy)
    assert enhanced.frames.shape == noisy.frames.shape
    assert (enhanced.hop, enhanced.n_samples) == (2, 12)
    assert np.all(np.isfinite(enhanced.frames))

    empty = Spectrogram(frames=np.zeros((0, 3), dtype=np.complex128), frame_len=6, hop=2, window="hann", n_samples=0)
    assert model.enhance(empty).frames.shape == (0, 3)


def test_enhance_is_deterministic(model, rng):
    noisy = Spectrogram(frames=cnormal(rng, 4, 3), frame_len=6, hop=2, window="hann", n_samples=8)
    np.testing.assert_array_equal(model.enhance(noisy).frames, model.enhance(noisy).frames)
