"""Shared fixtures: a seeded generator, a tiny run configuration and a generated toy corpus."""

from pathlib import Path

import numpy as np
import pytest

from crvae.schemas.config import RunConfig
from crvae.schemas.corpus import CorpusManifest
from crvae.services.corpus import generate_toy_corpus

from .helpers import make_config


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path: Path) -> RunConfig:
    return make_config(tmp_path)


@pytest.fixture
def toy_corpus(tiny_config: RunConfig) -> CorpusManifest:
    return generate_toy_corpus(tiny_config)
