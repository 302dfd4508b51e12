from pathlib import Path

import numpy as np
import structlog

from ..audio.dsp import istft, stft_from_config
from ..audio.wav import read_wav, write_wav
from ..core.exceptions import ConfigError, FormatError
from ..core.utils.pool import parallel_map
from ..engine.checkpoint import load_checkpoint
from ..engine.model import CrvaeModel
from ..schemas.config import RunConfig

logger = structlog.get_logger(__name__)


def load_model(config: RunConfig, checkpoint: Path | None = None) -> CrvaeModel:
    """Model weights from a checkpoint whose model and DSP settings match the run config."""
    path = checkpoint or config.paths.best_checkpoint
    ckpt = load_checkpoint(path)
    ckpt.check_compatible(config)
    model = CrvaeModel.initialize(ckpt.model, np.random.default_rng(0))
    model.load_state(ckpt.tensors)
    logger.info("Model loaded", checkpoint=str(path), epoch=ckpt.state.epoch, parameters=model.num_parameters())
    return model


def enhance_file(model: CrvaeModel, config: RunConfig, source: Path, target: Path) -> None:
    noisy = read_wav(source)
    if noisy.sample_rate != config.dsp.sample_rate:
        raise FormatError(f"{source}: sampled at {noisy.sample_rate} Hz, expected {config.dsp.sample_rate}")
    enhanced = istft(model.enhance(stft_from_config(noisy, config.dsp)), length_hint=len(noisy.samples))
    write_wav(target, enhanced)


def collect_inputs(source: Path) -> list[Path]:
    source = Path(source)
    if source.is_file():
        return [source]
    if source.is_dir():
        return sorted(p for p in source.iterdir() if p.suffix.lower() == ".wav")
    raise ConfigError(f"input not found: {source}")


def enhance_paths(model: CrvaeModel, config: RunConfig, source: Path, out_dir: Path) -> list[Path]:
    """Enhance one WAV or every WAV in a directory; outputs keep their file names."""
    inputs = collect_inputs(source)
    if not inputs:
        logger.warning("No WAV files to enhance", source=str(source))
        return []
    out_dir = Path(out_dir)

    def run(path: Path) -> Path:
        target = out_dir / path.name
        enhance_file(model, config, path, target)
        return target

    outputs = parallel_map(run, inputs)
    logger.info("Enhancement finished", files=len(outputs), out_dir=str(out_dir))
    return outputs
