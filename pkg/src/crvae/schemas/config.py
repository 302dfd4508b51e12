"""Run configuration: the `key = value` file read by every subcommand."""

from enum import StrEnum
from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.exceptions import ConfigError, FormatError
from ..engine.cvae import LossMode


class Arch(StrEnum):
    RECURRENT = "recurrent"
    FEEDFORWARD = "feedforward"


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ModelConfig(Section):
    input_dim: int = Field(200, gt=0)
    frames_per_step: int = Field(2, ge=1)
    gru_units: int = Field(512, gt=0)
    latent_dim: int = Field(512, gt=0)
    arch: Arch = Arch.RECURRENT
    constrain_all_recurrences: bool = False
    loss_mode: LossMode = LossMode.L1_COMPOSITE
    kl_weight: float = Field(1.0, ge=0.0)
    # spectrogram values are multiplied by this before the network and divided after
    input_scale: float = Field(1.0, gt=0.0)

    @property
    def step_dim(self) -> int:
        return self.input_dim * self.frames_per_step


class TrainConfig(Section):
    batch_size: int = Field(100, gt=0)
    learning_rate: float = Field(1e-5, gt=0.0)
    patience_epochs: int = Field(50, ge=0)
    max_epochs: int = Field(1000, gt=0)
    segment_len: int = Field(50, gt=0)
    adam_beta1: float = Field(0.9, gt=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, gt=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)


class DspConfig(Section):
    sample_rate: int = Field(16000, gt=0)
    frame_len: int = Field(400, gt=0)
    hop: int = Field(100, gt=0)
    window: str = "hann"

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2

    @model_validator(mode="after")
    def check_hop(self) -> Self:
        if self.hop > self.frame_len:
            raise ValueError("dsp.hop must not exceed dsp.frame_len")
        return self


def _split_ints(value: Any) -> Any:
    if isinstance(value, str):
        return [int(part) for part in value.split(",") if part.strip()]
    return value


class DataConfig(Section):
    train_utts: int = Field(40, gt=0)
    dev_utts: int = Field(8, gt=0)
    test_utts: int = Field(8, gt=0)
    duration_s: float = Field(2.0, gt=0.0)
    noise_duration_s: float = Field(20.0, gt=0.0)
    mixtures_per_utterance: int = Field(1, gt=0)
    train_snr_min: int = -10
    train_snr_max: int = 10
    test_snrs: list[int] = [-6, -3, 0, 3, 6]
    # common gain applied to rendered clean/noisy pairs so PCM16 files do not clip
    mixture_gain: float = Field(0.05, gt=0.0)

    @field_validator("test_snrs", mode="before")
    @classmethod
    def parse_snrs(cls, value: Any) -> Any:
        return _split_ints(value)

    @model_validator(mode="after")
    def check_snr_range(self) -> Self:
        if self.train_snr_min > self.train_snr_max:
            raise ValueError("data.train_snr_min must not exceed data.train_snr_max")
        return self


class PathsConfig(Section):
    corpus_dir: Path = Path("corpus")
    manifest: Path | None = None
    run_dir: Path = Path("runs/default")

    @property
    def manifest_path(self) -> Path:
        return self.manifest if self.manifest is not None else self.corpus_dir / "manifest.tsv"

    @property
    def best_checkpoint(self) -> Path:
        return self.run_dir / "best.ckpt"

    @property
    def last_checkpoint(self) -> Path:
        return self.run_dir / "last.ckpt"

    @property
    def metrics_log(self) -> Path:
        return self.run_dir / "metrics.tsv"

    @property
    def report_path(self) -> Path:
        return self.run_dir / "report.tsv"


class GradcheckConfig(Section):
    eps: float = Field(1e-6, gt=0.0)
    tol: float = Field(1e-4, gt=0.0)


class RunConfig(Section):
    seed: int = Field(0, ge=0)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    dsp: DspConfig = Field(default_factory=DspConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    gradcheck: GradcheckConfig = Field(default_factory=GradcheckConfig)

    @model_validator(mode="after")
    def check_spectrogram_size(self) -> Self:
        if self.model.input_dim != self.dsp.n_bins:
            raise ValueError(
                f"model.input_dim ({self.model.input_dim}) must equal dsp.frame_len // 2 ({self.dsp.n_bins})"
            )
        return self

    def to_text(self) -> str:
        """Serialize every field as `section.key = value` lines."""
        lines = [f"seed = {self.seed}"]
        for section in ("model", "train", "dsp", "data", "paths", "gradcheck"):
            lines.append("")
            for key, value in getattr(self, section).model_dump().items():
                if value is None:
                    continue
                lines.append(f"{section}.{key} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, StrEnum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _nest(pairs: dict[str, str]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in pairs.items():
        head, _, tail = key.partition(".")
        if tail:
            if "." in tail:
                raise ConfigError(f"unknown config key: {key}")
            section = nested.setdefault(head, {})
            if not isinstance(section, dict):
                raise ConfigError(f"unknown config key: {key}")
            section[tail] = value
        else:
            nested[head] = value
    return nested


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        key = ".".join(str(loc) for loc in item["loc"])
        if item["type"] == "extra_forbidden":
            parts.append(f"unknown config key: {key}")
        else:
            parts.append(f"{key}: {item['msg']}" if key else item["msg"])
    return "; ".join(parts)


def parse_config_text(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse `key = value` lines with `#` comments and dotted section keys."""
    pairs: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {number}: expected `key = value`, got {raw.strip()!r}")
        pairs[key.strip()] = value.strip()
    pairs.update(overrides or {})
    try:
        return RunConfig.model_validate(_nest(pairs))
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e


def load_config(path: Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    if path is None:
        return parse_config_text("", overrides)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except OSError as e:
        raise FormatError(f"cannot read config file {path}: {e}") from e
    return parse_config_text(text, overrides)
