"""STFT analysis and overlap-add synthesis."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from ..core.exceptions import ConfigError, ShapeError
from ..schemas.config import DspConfig
from .wav import Waveform

# synthesis leaves samples whose window-square envelope is below this at zero
ENVELOPE_FLOOR = 1e-8


@dataclass(slots=True)
class Spectrogram:
    """Time-major complex frames, bins 0 .. frame_len/2 - 1."""

    frames: npt.NDArray[np.complex128]
    frame_len: int
    hop: int
    window: str
    n_samples: int
    sample_rate: int = 16000

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def get_window(name: str, frame_len: int) -> npt.NDArray[np.float64]:
    """Periodic (DFT-even) window by scipy name."""
    try:
        return signal.get_window(name, frame_len, fftbins=True).astype(np.float64)
    except ValueError as e:
        raise ConfigError(f"unknown window: {name!r}") from e


def _check_framing(frame_len: int, hop: int) -> None:
    if not 0 < hop <= frame_len:
        raise ConfigError(f"need 0 < hop <= frame_len, got hop={hop}, frame_len={frame_len}")
    if frame_len % 2:
        raise ConfigError(f"frame_len must be even, got {frame_len}")


def _frame_count(n_padded: int, frame_len: int, hop: int) -> int:
    return 1 + max(0, -(-(n_padded - frame_len) // hop))


def stft(w: Waveform, frame_len: int = 400, hop: int = 100, window: str = "hann") -> Spectrogram:
    """Pads frame_len - hop zeros at both ends so every sample sits under a full window overlap."""
    _check_framing(frame_len, hop)
    win = get_window(window, frame_len)
    edge = frame_len - hop
    x = np.asarray(w.samples, dtype=np.float64)
    padded = np.concatenate([np.zeros(edge), x, np.zeros(edge)])
    n_frames = _frame_count(len(padded), frame_len, hop)
    total = (n_frames - 1) * hop + frame_len
    padded = np.concatenate([padded, np.zeros(total - len(padded))])

    frames = sliding_window_view(padded, frame_len)[::hop][:n_frames] * win
    spectrum = np.fft.rfft(frames, axis=1)[:, : frame_len // 2]
    return Spectrogram(
        frames=np.ascontiguousarray(spectrum, dtype=np.complex128),
        frame_len=frame_len,
        hop=hop,
        window=window,
        n_samples=len(x),
        sample_rate=w.sample_rate,
    )


def stft_from_config(w: Waveform, dsp: DspConfig) -> Spectrogram:
    return stft(w, dsp.frame_len, dsp.hop, dsp.window)


def istft(s: Spectrogram, length_hint: int | None = None) -> Waveform:
    """Inverse DFT with the Nyquist bin restored as zero, windowed overlap-add, envelope normalization."""
    _check_framing(s.frame_len, s.hop)
    if s.frames.ndim != 2 or s.frames.shape[1] != s.frame_len // 2:
        raise ShapeError(f"spectrogram needs {s.frame_len // 2} bins per frame, got shape {s.frames.shape}")
    win = get_window(s.window, s.frame_len)
    n_frames = s.n_frames
    n_out = s.n_samples if length_hint is None else length_hint
    edge = s.frame_len - s.hop
    total = max((n_frames - 1) * s.hop + s.frame_len, 0)

    full = np.concatenate([s.frames, np.zeros((n_frames, 1), dtype=np.complex128)], axis=1)
    frames = np.fft.irfft(full, n=s.frame_len, axis=1) * win
    signal_sum = np.zeros(total)
    envelope = np.zeros(total)
    for k in range(n_frames):
        start = k * s.hop
        signal_sum[start : start + s.frame_len] += frames[k]
        envelope[start : start + s.frame_len] += win**2

    out = np.divide(signal_sum, envelope, out=np.zeros(total), where=envelope > ENVELOPE_FLOOR)
    out = out[edge : edge + n_out]
    if len(out) < n_out:
        out = np.concatenate([out, np.zeros(n_out - len(out))])
    return Waveform(samples=out, sample_rate=s.sample_rate)


def cola_error(window: str = "hann", frame_len: int = 400, hop: int = 100) -> float:
    """Peak deviation of sum_k window^2(n - k*hop) from its mean over one hop period."""
    _check_framing(frame_len, hop)
    win = get_window(window, frame_len)
    envelope = np.zeros(hop)
    for start in range(0, frame_len, hop):
        chunk = win[start : start + hop] ** 2
        envelope[: len(chunk)] += chunk
    return float(np.max(np.abs(envelope - envelope.mean())))
