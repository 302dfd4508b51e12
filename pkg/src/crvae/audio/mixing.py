"""RMS normalization, energy VAD and SNR-controlled mixing."""

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from ..core.exceptions import DegenerateInputError, ShapeError
from ..schemas.corpus import MixSpec
from .wav import Waveform

VAD_FRAME_S = 0.020
VAD_HOP_S = 0.010
VAD_THRESHOLD_DB = -40.0
SILENCE_RMS = 1e-12


def rms(x: npt.NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else 0.0


def rms_normalize(w: Waveform) -> Waveform:
    level = rms(w.samples)
    if level <= SILENCE_RMS:
        raise DegenerateInputError("cannot RMS-normalize a silent signal")
    return Waveform(samples=w.samples / level, sample_rate=w.sample_rate)


def _vad_framing(sample_rate: int) -> tuple[int, int]:
    return round(VAD_FRAME_S * sample_rate), round(VAD_HOP_S * sample_rate)


def active_region_mask(w: Waveform) -> npt.NDArray[np.bool_]:
    """Per 20 ms frame (10 ms hop): active where frame RMS is within 40 dB of the loudest frame."""
    frame, hop = _vad_framing(w.sample_rate)
    x = np.asarray(w.samples, dtype=np.float64)
    if len(x) < frame:
        x = np.concatenate([x, np.zeros(frame - len(x))])
    frames = sliding_window_view(x, frame)[::hop]
    levels = np.sqrt(np.mean(frames**2, axis=1))
    peak = levels.max()
    if peak <= SILENCE_RMS:
        raise DegenerateInputError("signal is silent; no speech-active frames")
    return levels > peak * 10 ** (VAD_THRESHOLD_DB / 20)


def active_samples(w: Waveform) -> npt.NDArray[np.bool_]:
    """Sample-level mask: the union of the active VAD frames."""
    frame, hop = _vad_framing(w.sample_rate)
    mask = active_region_mask(w)
    samples = np.zeros(max(len(w.samples), frame), dtype=bool)
    for index in np.flatnonzero(mask):
        samples[index * hop : index * hop + frame] = True
    return samples[: len(w.samples)]


def active_power(w: Waveform) -> float:
    return float(np.mean(np.square(w.samples[active_samples(w)])))


def noise_segment(noise: Waveform, offset: int, length: int) -> npt.NDArray[np.float64]:
    """`length` samples from `offset`, wrapping around when the noise is shorter."""
    if len(noise.samples) == 0:
        raise DegenerateInputError("noise signal is empty")
    index = (offset + np.arange(length)) % len(noise.samples)
    return noise.samples[index]


def noise_gain(clean: Waveform, segment: npt.NDArray[np.float64], snr_db: float) -> float:
    noise_power = float(np.mean(np.square(segment))) if len(segment) else 0.0
    if noise_power <= SILENCE_RMS**2:
        raise DegenerateInputError("noise segment is silent")
    return float(np.sqrt(active_power(clean) / (noise_power * 10 ** (snr_db / 10))))


def mix_at_snr(clean: Waveform, noise: Waveform, spec: MixSpec) -> Waveform:
    """Add noise scaled so that active clean power over noise power equals spec.snr_db."""
    if clean.sample_rate != noise.sample_rate:
        raise ShapeError(f"sample rates differ: {clean.sample_rate} vs {noise.sample_rate}")
    segment = noise_segment(noise, spec.noise_offset, len(clean.samples))
    gain = noise_gain(clean, segment, spec.snr_db)
    return Waveform(samples=clean.samples + gain * segment, sample_rate=clean.sample_rate)


def measured_snr(clean: Waveform, noisy: Waveform) -> float:
    """SNR in dB of a mixture, with clean power taken over the VAD-active samples."""
    residual = noisy.samples - clean.samples
    return float(10 * np.log10(active_power(clean) / np.mean(np.square(residual))))


def draw_snr(rng: np.random.Generator, low: int = -10, high: int = 10) -> int:
    """Uniform over the integers low..high inclusive."""
    return int(rng.integers(low, high + 1))
