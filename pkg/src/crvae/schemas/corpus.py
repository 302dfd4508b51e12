"""Corpus manifest and mixture tables."""

from enum import StrEnum
from pathlib import Path
from typing import Self

from pydantic import BaseModel, Field, model_validator

from ..core.exceptions import FormatError


class Split(StrEnum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Role(StrEnum):
    SPEECH = "speech"
    NOISE_SEEN = "noise-seen"
    NOISE_UNSEEN = "noise-unseen"


class ManifestEntry(BaseModel):
    split: Split
    role: Role
    path: Path

    @property
    def name(self) -> str:
        return self.path.stem

    @property
    def is_noise(self) -> bool:
        return self.role is not Role.SPEECH

    @property
    def seen(self) -> bool:
        return self.role is Role.NOISE_SEEN


class CorpusManifest(BaseModel):
    """Line-based manifest: `<split>\\t<role>\\t<path>`, paths relative to the manifest directory."""

    root: Path = Path(".")
    entries: list[ManifestEntry] = []

    @model_validator(mode="after")
    def check_disjoint_splits(self) -> Self:
        owner: dict[Path, Split] = {}
        for entry in self.entries:
            if entry.is_noise:
                continue
            previous = owner.setdefault(entry.path, entry.split)
            if previous is not entry.split:
                raise ValueError(f"utterance {entry.path} appears in both {previous} and {entry.split}")
        return self

    def speech(self, split: Split) -> list[Path]:
        return [self.root / e.path for e in self.entries if e.split is split and not e.is_noise]

    def noises(self, split: Split) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split is split and e.is_noise]

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def to_text(self) -> str:
        return "".join(f"{e.split.value}\t{e.role.value}\t{e.path.as_posix()}\n" for e in self.entries)

    @classmethod
    def parse(cls, text: str, root: Path = Path(".")) -> "CorpusManifest":
        entries = []
        for number, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            fields = raw.split("\t")
            if len(fields) != 3:
                raise FormatError(f"manifest line {number}: expected 3 tab-separated fields, got {len(fields)}")
            split, role, path = fields
            try:
                entries.append(ManifestEntry(split=Split(split), role=Role(role), path=Path(path)))
            except ValueError as e:
                raise FormatError(f"manifest line {number}: {e}") from e
        try:
            return cls(root=root, entries=entries)
        except ValueError as e:
            raise FormatError(f"invalid manifest: {e}") from e

    @classmethod
    def load(cls, path: Path) -> "CorpusManifest":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError as e:
            raise FormatError(f"manifest not found: {path}") from e
        except OSError as e:
            raise FormatError(f"cannot read manifest {path}: {e}") from e
        return cls.parse(text, root=path.parent)


class MixSpec(BaseModel):
    clean_id: str
    noise_id: str
    snr_db: float
    noise_offset: int = Field(ge=0)
    seed: int


MIXTURE_COLUMNS = ("id", "clean", "noise", "noise_type", "seen", "snr_db", "offset", "seed")


class MixtureRecord(BaseModel):
    """One rendered test mixture; paths are relative to the corpus directory."""

    id: str
    clean: str
    noise: str
    noise_type: str
    seen: bool
    snr_db: int
    offset: int
    seed: int

    def to_tsv(self) -> str:
        values = [self.id, self.clean, self.noise, self.noise_type, str(self.seen).lower(), str(self.snr_db)]
        return "\t".join([*values, str(self.offset), str(self.seed)])


def mixtures_to_text(records: list[MixtureRecord]) -> str:
    return "\t".join(MIXTURE_COLUMNS) + "\n" + "".join(r.to_tsv() + "\n" for r in records)


def parse_mixtures(text: str) -> list[MixtureRecord]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or tuple(lines[0].split("\t")) != MIXTURE_COLUMNS:
        raise FormatError("mixture table has a missing or unexpected header")
    records = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(MIXTURE_COLUMNS):
            raise FormatError(f"mixture table line {number}: expected {len(MIXTURE_COLUMNS)} fields")
        try:
            records.append(MixtureRecord.model_validate(dict(zip(MIXTURE_COLUMNS, fields))))
        except ValueError as e:
            raise FormatError(f"mixture table line {number}: {e}") from e
    return records


def load_mixtures(path: Path) -> list[MixtureRecord]:
    try:
        return parse_mixtures(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise FormatError(f"mixture table not found: {path}") from e
