"""Tests for checkpoint loading and WAV enhancement."""

import numpy as np
import pytest

from crvae.audio.wav import Waveform, read_wav, write_wav
from crvae.core.exceptions import ConfigError, FormatError
from crvae.engine.checkpoint import TrainingState, save_checkpoint
from crvae.engine.model import CrvaeModel
from crvae.engine.optim import AdamMoments
from crvae.services.enhance import collect_inputs, enhance_paths, load_model
from crvae.services.train import make_checkpoint

from .helpers import make_config


@pytest.fixture
def saved_model(tiny_config, rng) -> CrvaeModel:
    model = CrvaeModel.initialize(tiny_config.model, rng)
    state = TrainingState(epoch=1, step=1, best_dev_loss=1.0, epochs_since_best=0, rng_state=rng.bit_generator.state)
    moments = AdamMoments.zeros_like(model.named_parameters())
    save_checkpoint(tiny_config.paths.best_checkpoint, make_checkpoint(model, tiny_config, state, moments))
    return model


def test_loaded_model_matches_saved_weights(tiny_config, saved_model):
    loaded = load_model(tiny_config)
    for name, value in saved_model.named_parameters().items():
        np.testing.assert_array_equal(loaded.named_parameters()[name], value, err_msg=name)


def test_load_rejects_incompatible_config(tmp_path, saved_model):
    other = make_config(tmp_path, "model.gru_units = 5\n")
    with pytest.raises(ConfigError):
        load_model(other)


def test_enhanced_files_keep_name_length_and_rate(tiny_config, saved_model, tmp_path, rng):
    source = tmp_path / "noisy"
    lengths = {"a.wav": 16000, "b.wav": 12345}
    for name, n in lengths.items():
        write_wav(source / name, Waveform(0.1 * rng.standard_normal(n), 16000))
    (source / "notes.txt").write_text("ignored")

    outputs = enhance_paths(load_model(tiny_config), tiny_config, source, tmp_path / "out")

    assert sorted(p.name for p in outputs) == sorted(lengths)
    for path in outputs:
        enhanced = read_wav(path)
        assert enhanced.sample_rate == 16000
        assert len(enhanced.samples) == lengths[path.name]
        assert np.all(np.isfinite(enhanced.samples))


def test_single_file_input(tiny_config, saved_model, tmp_path, rng):
    path = tmp_path / "one.wav"
    write_wav(path, Waveform(0.1 * rng.standard_normal(4000), 16000))
    (output,) = enhance_paths(saved_model, tiny_config, path, tmp_path / "out")
    assert output == tmp_path / "out" / "one.wav"


def test_wrong_sample_rate_is_rejected(tiny_config, saved_model, tmp_path, rng):
    path = tmp_path / "fast.wav"
    write_wav(path, Waveform(0.1 * rng.standard_normal(4000), 8000))
    with pytest.raises(FormatError):
        enhance_paths(saved_model, tiny_config, path, tmp_path / "out")


def test_empty_directory_enhances_nothing(tiny_config, saved_model, tmp_path):
    (tmp_path / "empty").mkdir()
    assert enhance_paths(saved_model, tiny_config, tmp_path / "empty", tmp_path / "out") == []


def test_missing_input_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        collect_inputs(tmp_path / "absent")
