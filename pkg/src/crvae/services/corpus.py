"""Synthetic desk-scale corpus: speech-like utterances, three noise types and fixed test mixtures."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import structlog

from ..audio.mixing import mix_at_snr, rms_normalize
from ..audio.wav import Waveform, read_wav, write_wav
from ..core.exceptions import ConfigError
from ..core.utils.pool import parallel_map
from ..schemas.config import RunConfig
from ..schemas.corpus import (
    CorpusManifest,
    ManifestEntry,
    MixSpec,
    MixtureRecord,
    Role,
    Split,
    mixtures_to_text,
)

logger = structlog.get_logger(__name__)

SEEN_NOISES = ("white", "pink")
UNSEEN_NOISES = ("babble",)
BABBLE_TALKERS = 6
PEAK_LEVEL = 0.5

# child-seed streams, so every item is reproducible on its own
STREAM_SPEECH = 1
STREAM_NOISE = 2
STREAM_MIXTURE = 3

SPLIT_STREAMS = {Split.TRAIN: 0, Split.DEV: 1, Split.TEST: 2}


def _peak_normalize(x: npt.NDArray[np.float64], level: float = PEAK_LEVEL) -> npt.NDArray[np.float64]:
    peak = np.max(np.abs(x))
    return x * (level / peak) if peak > 0 else x


def _syllable_envelope(rng: np.random.Generator, n: int, sample_rate: int) -> npt.NDArray[np.float64]:
    """Raised-sine bursts of 150-350 ms separated by 80-200 ms of digital silence."""
    envelope = np.zeros(n)
    pos = int(rng.uniform(0.05, 0.15) * sample_rate)
    while pos < n:
        burst = int(rng.uniform(0.15, 0.35) * sample_rate)
        end = min(pos + burst, n)
        t = np.arange(end - pos) / max(burst - 1, 1)
        envelope[pos:end] = np.sin(np.pi * t) ** 2 * rng.uniform(0.5, 1.0)
        pos = end + int(rng.uniform(0.08, 0.2) * sample_rate)
    return envelope


def toy_utterance(rng: np.random.Generator, duration_s: float, sample_rate: int) -> npt.NDArray[np.float64]:
    """3-5 harmonics of a 100-220 Hz fundamental with vibrato, amplitude-modulated into syllables."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(100.0, 220.0)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sample_rate
    voiced = np.zeros(n)
    for k in range(1, int(rng.integers(3, 6)) + 1):
        voiced += rng.uniform(0.3, 1.0) / k * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    return _peak_normalize(voiced * _syllable_envelope(rng, n, sample_rate))


def white_noise(rng: np.random.Generator, n: int) -> npt.NDArray[np.float64]:
    return _peak_normalize(rng.standard_normal(n))


def pink_noise(rng: np.random.Generator, n: int) -> npt.NDArray[np.float64]:
    """White noise shaped by 1/sqrt(f) in amplitude (-3 dB per octave)."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.arange(len(spectrum), dtype=np.float64)
    shaping = np.zeros_like(freqs)
    shaping[1:] = 1.0 / np.sqrt(freqs[1:])
    return _peak_normalize(np.fft.irfft(spectrum * shaping, n=n))


def babble_noise(rng: np.random.Generator, n: int, sample_rate: int) -> npt.NDArray[np.float64]:
    duration = n / sample_rate
    talkers = [
        rms_normalize(Waveform(toy_utterance(rng, duration, sample_rate), sample_rate)).samples
        for _ in range(BABBLE_TALKERS)
    ]
    return _peak_normalize(np.sum(talkers, axis=0))


def make_noise(name: str, seed: int, n: int, sample_rate: int) -> npt.NDArray[np.float64]:
    if name not in SEEN_NOISES + UNSEEN_NOISES:
        raise ConfigError(f"unknown noise type: {name!r}")
    rng = np.random.default_rng([seed, STREAM_NOISE, (SEEN_NOISES + UNSEEN_NOISES).index(name)])
    if name == "white":
        return white_noise(rng, n)
    if name == "pink":
        return pink_noise(rng, n)
    return babble_noise(rng, n, sample_rate)


@dataclass(frozen=True, slots=True)
class _UtteranceJob:
    split: Split
    index: int
    path: Path


def utterance_seed(seed: int, split: Split, index: int) -> list[int]:
    return [seed, STREAM_SPEECH, SPLIT_STREAMS[split], index]


def mixture_id(noise: str, snr_db: int, utterance: str) -> str:
    return f"{noise}_{snr_db:+d}dB_{utterance}"


def generate_toy_corpus(config: RunConfig, out_dir: Path | None = None) -> CorpusManifest:
    """Write utterances, noises, the manifest and rendered test mixtures under `out_dir`."""
    data, sample_rate, seed = config.data, config.dsp.sample_rate, config.seed
    root = Path(out_dir or config.paths.corpus_dir)
    counts = {Split.TRAIN: data.train_utts, Split.DEV: data.dev_utts, Split.TEST: data.test_utts}

    jobs = [
        _UtteranceJob(split, i, Path("speech") / split.value / f"{split.value}_{i:03d}.wav")
        for split, count in counts.items()
        for i in range(count)
    ]

    def write_utterance(job: _UtteranceJob) -> int:
        rng = np.random.default_rng(utterance_seed(seed, job.split, job.index))
        samples = toy_utterance(rng, data.duration_s, sample_rate)
        return write_wav(root / job.path, Waveform(samples, sample_rate))

    parallel_map(write_utterance, jobs)

    noise_len = int(round(data.noise_duration_s * sample_rate))
    noise_names = SEEN_NOISES + UNSEEN_NOISES

    def write_noise(name: str) -> Path:
        path = Path("noise") / f"{name}.wav"
        write_wav(root / path, Waveform(make_noise(name, seed, noise_len, sample_rate), sample_rate))
        return path

    noise_paths = dict(zip(noise_names, parallel_map(write_noise, noise_names)))

    entries = [ManifestEntry(split=job.split, role=Role.SPEECH, path=job.path) for job in jobs]
    for split in (Split.TRAIN, Split.DEV, Split.TEST):
        for name in SEEN_NOISES:
            entries.append(ManifestEntry(split=split, role=Role.NOISE_SEEN, path=noise_paths[name]))
    for name in UNSEEN_NOISES:
        entries.append(ManifestEntry(split=Split.TEST, role=Role.NOISE_UNSEEN, path=noise_paths[name]))

    manifest = CorpusManifest(root=root, entries=entries)
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.tsv").write_text(manifest.to_text(), encoding="utf-8")

    records = render_test_mixtures(config, manifest, root)
    logger.info(
        "Toy corpus generated",
        root=str(root),
        utterances=len(jobs),
        noises=len(noise_names),
        test_mixtures=len(records),
    )
    return manifest


def render_test_mixtures(config: RunConfig, manifest: CorpusManifest, root: Path) -> list[MixtureRecord]:
    """Every test utterance x test noise x test SNR, written to test/clean, test/noisy and test/mixtures.tsv."""
    data, seed = config.data, config.seed
    noises = manifest.noises(Split.TEST)
    noise_audio = {e.name: read_wav(manifest.resolve(e)) for e in noises}
    utterances = manifest.speech(Split.TEST)

    plan: list[tuple[MixtureRecord, Path]] = []
    for u_index, utt_path in enumerate(utterances):
        for n_index, entry in enumerate(noises):
            for snr in data.test_snrs:
                stream = [seed, STREAM_MIXTURE, u_index, n_index, snr + 1000]
                mix_seed = int(np.random.default_rng(stream).integers(2**31))
                noise_len = len(noise_audio[entry.name].samples)
                offset = int(np.random.default_rng(mix_seed).integers(0, noise_len))
                record = MixtureRecord(
                    id=mixture_id(entry.name, snr, utt_path.stem),
                    clean=utt_path.relative_to(root).as_posix(),
                    noise=entry.path.as_posix(),
                    noise_type=entry.name,
                    seen=entry.seen,
                    snr_db=snr,
                    offset=offset,
                    seed=mix_seed,
                )
                plan.append((record, utt_path))

    def render(item: tuple[MixtureRecord, Path]) -> MixtureRecord:
        record, utt_path = item
        clean = rms_normalize(read_wav(utt_path))
        spec = MixSpec(
            clean_id=utt_path.stem,
            noise_id=record.noise_type,
            snr_db=record.snr_db,
            noise_offset=record.offset,
            seed=record.seed,
        )
        noisy = mix_at_snr(clean, noise_audio[record.noise_type], spec)
        gain = data.mixture_gain
        write_wav(root / "test" / "clean" / f"{record.id}.wav", Waveform(clean.samples * gain, clean.sample_rate))
        write_wav(root / "test" / "noisy" / f"{record.id}.wav", Waveform(noisy.samples * gain, noisy.sample_rate))
        return record

    records = parallel_map(render, plan)
    table = root / "test" / "mixtures.tsv"
    table.parent.mkdir(parents=True, exist_ok=True)
    table.write_text(mixtures_to_text(records), encoding="utf-8")
    return records
