"""PCM16 mono WAV input and output."""

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import soundfile as sf
import structlog

from ..core.exceptions import FormatError

logger = structlog.get_logger(__name__)

PCM_SCALE = 32768.0


@dataclass(slots=True)
class Waveform:
    samples: npt.NDArray[np.float64]
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(path: Path) -> Waveform:
    path = Path(path)
    try:
        info = sf.info(str(path))
    except (RuntimeError, OSError) as e:
        raise FormatError(f"cannot read WAV {path}: {e}") from e
    if info.format != "WAV" or info.subtype != "PCM_16":
        raise FormatError(f"{path}: expected PCM16 WAV, found {info.format}/{info.subtype}")
    if info.channels != 1:
        raise FormatError(f"{path}: expected mono audio, found {info.channels} channels")
    try:
        pcm, sample_rate = sf.read(str(path), dtype="int16", always_2d=False)
    except (RuntimeError, OSError) as e:
        raise FormatError(f"cannot read WAV {path}: {e}") from e
    return Waveform(samples=pcm.astype(np.float64) / PCM_SCALE, sample_rate=int(sample_rate))


def to_pcm16(samples: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.int16], int]:
    """Quantize [-1, 1) floats to int16; returns the samples and how many were clipped."""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * PCM_SCALE)
    clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
    return np.clip(scaled, -32768, 32767).astype(np.int16), clipped


def write_wav(path: Path, w: Waveform) -> int:
    """Write atomically as PCM16 mono; returns the number of clipped samples."""
    path = Path(path)
    if not np.all(np.isfinite(w.samples)):
        raise FormatError(f"{path}: refusing to write non-finite samples")
    pcm, clipped = to_pcm16(w.samples)
    if clipped:
        logger.warning("Samples clipped while writing WAV", path=str(path), clipped=clipped)

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as e:
        raise FormatError(f"cannot create WAV {path}: {e}") from e
    os.close(fd)
    try:
        sf.write(tmp, pcm, w.sample_rate, subtype="PCM_16", format="WAV")
        os.replace(tmp, path)
    except (RuntimeError, OSError) as e:
        Path(tmp).unlink(missing_ok=True)
        raise FormatError(f"cannot write WAV {path}: {e}") from e
    return clipped
