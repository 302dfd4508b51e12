from pathlib import Path

import numpy as np

from crvae.schemas.config import RunConfig, parse_config_text

TINY_CONFIG = """
seed = 3
model.gru_units = 4
model.latent_dim = 3
train.batch_size = 4
train.learning_rate = 1e-3
train.max_epochs = 2
train.patience_epochs = 5
train.segment_len = 10
data.train_utts = 3
data.dev_utts = 2
data.test_utts = 2
data.duration_s = 1.5
data.noise_duration_s = 3.0
data.test_snrs = 0,6
"""


def cnormal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def make_config(tmp_path: Path, extra: str = "") -> RunConfig:
    paths = f"paths.corpus_dir = {tmp_path / 'corpus'}\npaths.run_dir = {tmp_path / 'run'}\n"
    return parse_config_text(TINY_CONFIG + paths + extra)
