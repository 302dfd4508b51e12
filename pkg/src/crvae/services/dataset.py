"""Training and dev data: seeded mixture plans rendered into fixed-length spectrogram segments."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import structlog

from ..audio.dsp import stft_from_config
from ..audio.mixing import draw_snr, mix_at_snr, rms_normalize
from ..audio.wav import Waveform, read_wav
from ..core.exceptions import ConfigError, FormatError
from ..core.utils.pool import parallel_map
from ..engine.model import frames_to_steps
from ..schemas.config import RunConfig
from ..schemas.corpus import CorpusManifest, MixSpec, Split
from .corpus import SPLIT_STREAMS

logger = structlog.get_logger(__name__)

STREAM_PLAN = 4


@dataclass(slots=True)
class TrainingData:
    """Segments of shape (N, segment_len, step_dim); `noisy` is the input, `clean` the target."""

    noisy: npt.NDArray[np.complex128]
    clean: npt.NDArray[np.complex128]

    def __len__(self) -> int:
        return self.noisy.shape[0]


def plan_mixtures(
    manifest: CorpusManifest, split: Split, config: RunConfig, noise_lengths: dict[str, int]
) -> list[MixSpec]:
    """Fixed mixture list for a split: noise, SNR and offset drawn from a seed per utterance."""
    data = config.data
    noises = [e.name for e in manifest.noises(split) if e.seen]
    if not noises:
        raise ConfigError(f"manifest lists no seen noise for the {split.value} split")
    specs = []
    for index, path in enumerate(manifest.speech(split)):
        for k in range(data.mixtures_per_utterance):
            stream = [config.seed, STREAM_PLAN, SPLIT_STREAMS[split], index, k]
            seed = int(np.random.default_rng(stream).integers(2**31))
            rng = np.random.default_rng(seed)
            noise = noises[int(rng.integers(len(noises)))]
            snr = draw_snr(rng, data.train_snr_min, data.train_snr_max)
            offset = int(rng.integers(0, noise_lengths[noise]))
            specs.append(MixSpec(clean_id=str(path), noise_id=noise, snr_db=snr, noise_offset=offset, seed=seed))
    return specs


def render_pair(spec: MixSpec, clean: Waveform, noise: Waveform, gain: float) -> tuple[Waveform, Waveform]:
    """(clean, noisy) at the common output gain, clean normalized to unit RMS before mixing."""
    reference = rms_normalize(clean)
    noisy = mix_at_snr(reference, noise, spec)
    return (
        Waveform(reference.samples * gain, reference.sample_rate),
        Waveform(noisy.samples * gain, noisy.sample_rate),
    )


def segment_steps(steps: npt.NDArray[np.complex128], segment_len: int) -> npt.NDArray[np.complex128]:
    """Cut (S, step_dim) into (ceil(S / segment_len), segment_len, step_dim), zero-padding the last one."""
    pad = (-steps.shape[0]) % segment_len
    if pad:
        steps = np.concatenate([steps, np.zeros((pad, steps.shape[1]), dtype=np.complex128)])
    return steps.reshape(-1, segment_len, steps.shape[1])


def build_segments(pairs: list[tuple[Waveform, Waveform]], config: RunConfig) -> TrainingData:
    """STFT both sides, scale by model.input_scale, pair frames into steps and cut into segments."""
    scale = config.model.input_scale
    noisy_parts, clean_parts = [], []
    for clean, noisy in pairs:
        for wave, parts in ((noisy, noisy_parts), (clean, clean_parts)):
            frames = stft_from_config(wave, config.dsp).frames * scale
            parts.append(segment_steps(frames_to_steps(frames, config.model), config.train.segment_len))
    step_dim = config.model.step_dim
    empty = np.zeros((0, config.train.segment_len, step_dim), dtype=np.complex128)
    return TrainingData(
        noisy=np.concatenate(noisy_parts) if noisy_parts else empty,
        clean=np.concatenate(clean_parts) if clean_parts else empty,
    )


def load_split(manifest: CorpusManifest, split: Split, config: RunConfig) -> TrainingData:
    noises = {e.name: read_wav(manifest.resolve(e)) for e in manifest.noises(split) if e.seen}
    for name, noise in noises.items():
        if noise.sample_rate != config.dsp.sample_rate:
            raise FormatError(f"noise {name}: {noise.sample_rate} Hz, expected {config.dsp.sample_rate}")
    specs = plan_mixtures(manifest, split, config, {name: len(n.samples) for name, n in noises.items()})

    def render(spec: MixSpec) -> tuple[Waveform, Waveform]:
        clean = read_wav(spec.clean_id)
        if clean.sample_rate != config.dsp.sample_rate:
            raise FormatError(f"{spec.clean_id}: {clean.sample_rate} Hz, expected {config.dsp.sample_rate}")
        return render_pair(spec, clean, noises[spec.noise_id], config.data.mixture_gain)

    data = build_segments(parallel_map(render, specs), config)
    logger.info("Split prepared", split=split.value, mixtures=len(specs), segments=len(data))
    return data


def prepare_training_data(config: RunConfig, manifest: CorpusManifest) -> tuple[TrainingData, TrainingData]:
    train = load_split(manifest, Split.TRAIN, config) if manifest.speech(Split.TRAIN) else None
    if train is None or len(train) == 0:
        raise ConfigError("corpus has no training utterances")
    if not manifest.speech(Split.DEV):
        raise ConfigError("corpus has no dev utterances")
    return train, load_split(manifest, Split.DEV, config)
