"""Objective speech metrics: SI-SDR and ESTOI."""

import warnings

import numpy as np
import numpy.typing as npt
from pystoi import stoi

from ..core.exceptions import DomainError, ShapeError
from .wav import Waveform

SI_SDR_CAP_DB = 100.0


def _samples(x: Waveform | npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.asarray(x.samples if isinstance(x, Waveform) else x, dtype=np.float64)


def si_sdr(reference: Waveform | npt.ArrayLike, estimate: Waveform | npt.ArrayLike) -> float:
    """Scale-invariant SDR in dB, clamped to +/-100 dB."""
    ref, est = _samples(reference), _samples(estimate)
    if ref.shape != est.shape:
        raise ShapeError(f"reference and estimate lengths differ: {ref.shape} vs {est.shape}")
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise DomainError("SI-SDR is undefined for a zero reference")
    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    residual = est - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if target_energy == 0.0:
        return -SI_SDR_CAP_DB
    if residual_energy <= 1e-20 * target_energy:
        return SI_SDR_CAP_DB
    value = 10.0 * np.log10(target_energy / residual_energy)
    return float(np.clip(value, -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def estoi(reference: Waveform, estimate: Waveform) -> float:
    """Extended STOI (10 kHz resampling, silent-frame removal, 384 ms segments, 15 third-octave bands)."""
    ref, est = _samples(reference), _samples(estimate)
    if ref.shape != est.shape:
        raise ShapeError(f"reference and estimate lengths differ: {ref.shape} vs {est.shape}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        score = float(stoi(ref, est, reference.sample_rate, extended=True))
    for warning in caught:
        if "Not enough STFT frames" in str(warning.message):
            raise DomainError("ESTOI needs at least 384 ms of active speech after silent-frame removal")
    if not np.isfinite(score):
        raise DomainError("ESTOI is undefined for these signals")
    return float(np.clip(score, -1.0, 1.0))
