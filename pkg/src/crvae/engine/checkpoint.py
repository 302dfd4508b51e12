"""Binary checkpoint format.

Little-endian layout:

    magic        8 bytes  b"CRVAE001"
    config       u64 length + UTF-8 JSON (model, train and dsp sections)
    state        u64 length + UTF-8 JSON (epoch, step, best dev loss, patience counter, RNG state)
    tensors      u64 count + records
    optimizer    u64 count + records, named "m/<param>" and "v/<param>"

    record       u32 name length, name bytes, u32 ndim, ndim x u64 dims,
                 real plane f64s, imaginary plane f64s (row-major)

Real tensors are stored with a zero imaginary plane.
"""

import json
import os
import struct
import tempfile
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, ValidationError

from ..core.exceptions import ConfigError, FormatError
from ..schemas.config import DspConfig, ModelConfig, RunConfig, TrainConfig

logger = structlog.get_logger(__name__)

MAGIC = b"CRVAE001"
CONFIG_SECTIONS = ("model", "train", "dsp")


class TrainingState(BaseModel):
    epoch: int = 0
    step: int = 0
    best_dev_loss: float | None = None
    epochs_since_best: int = 0
    rng_state: dict[str, Any] = {}


@dataclass(slots=True)
class Checkpoint:
    model: ModelConfig
    train: TrainConfig
    dsp: DspConfig
    state: TrainingState
    tensors: "OrderedDict[str, np.ndarray]"
    optimizer: "OrderedDict[str, np.ndarray]"

    def check_compatible(self, config: RunConfig) -> None:
        """Raise ConfigError when the run's model or DSP settings differ from the checkpoint's."""
        for section in ("model", "dsp"):
            ours, theirs = getattr(self, section).model_dump(), getattr(config, section).model_dump()
            diff = sorted(key for key in ours if ours[key] != theirs[key])
            if diff:
                keys = ", ".join(f"{section}.{key}" for key in diff)
                raise ConfigError(f"checkpoint was trained with different settings: {keys}")


def _config_blob(ckpt: Checkpoint) -> bytes:
    payload = {section: getattr(ckpt, section).model_dump(mode="json") for section in CONFIG_SECTIONS}
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _state_blob(state: TrainingState) -> bytes:
    return json.dumps(state.model_dump(mode="json"), sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_records(out: bytearray, tensors: "OrderedDict[str, np.ndarray]") -> None:
    out += struct.pack("<Q", len(tensors))
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        array = np.ascontiguousarray(tensor)
        out += struct.pack("<I", len(encoded)) + encoded
        out += struct.pack("<I", array.ndim)
        out += struct.pack(f"<{array.ndim}Q", *array.shape)
        out += np.ascontiguousarray(array.real, dtype="<f8").tobytes()
        imag = array.imag if np.iscomplexobj(array) else np.zeros(array.shape)
        out += np.ascontiguousarray(imag, dtype="<f8").tobytes()


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    out = bytearray(MAGIC)
    for blob in (_config_blob(ckpt), _state_blob(ckpt.state)):
        out += struct.pack("<Q", len(blob)) + blob
    _write_records(out, ckpt.tensors)
    _write_records(out, ckpt.optimizer)
    return bytes(out)


def save_checkpoint(path: Path, ckpt: Checkpoint) -> None:
    """Write atomically: a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(ckpt)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except OSError as e:
        Path(tmp).unlink(missing_ok=True)
        raise FormatError(f"cannot write checkpoint {path}: {e}") from e
    logger.debug("Checkpoint saved", path=str(path), bytes=len(data), epoch=ckpt.state.epoch)


class _Reader:
    def __init__(self, data: bytes, source: str) -> None:
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if n < 0 or self.offset + n > len(self.data):
            raise FormatError(f"{self.source}: truncated checkpoint")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def blob(self) -> dict:
        (length,) = self.unpack("<Q")
        try:
            return json.loads(self.take(length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"{self.source}: malformed checkpoint header: {e}") from e

    def records(self) -> "OrderedDict[str, np.ndarray]":
        (count,) = self.unpack("<Q")
        tensors: OrderedDict[str, np.ndarray] = OrderedDict()
        for _ in range(count):
            (name_len,) = self.unpack("<I")
            try:
                name = self.take(name_len).decode("utf-8")
            except UnicodeDecodeError as e:
                raise FormatError(f"{self.source}: malformed tensor name") from e
            (ndim,) = self.unpack("<I")
            shape = self.unpack(f"<{ndim}Q") if ndim else ()
            size = int(np.prod(shape, dtype=np.int64))
            real = np.frombuffer(self.take(8 * size), dtype="<f8")
            imag = np.frombuffer(self.take(8 * size), dtype="<f8")
            tensors[name] = (real + 1j * imag).reshape(shape).astype(np.complex128)
        return tensors


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(data, source)
    if reader.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{source}: not a checkpoint (bad magic)")
    config = reader.blob()
    state = reader.blob()
    tensors = reader.records()
    optimizer = reader.records()
    if reader.offset != len(data):
        raise FormatError(f"{source}: trailing bytes after checkpoint payload")
    try:
        return Checkpoint(
            model=ModelConfig.model_validate(config["model"]),
            train=TrainConfig.model_validate(config["train"]),
            dsp=DspConfig.model_validate(config["dsp"]),
            state=TrainingState.model_validate(state),
            tensors=tensors,
            optimizer=optimizer,
        )
    except (KeyError, ValidationError) as e:
        raise FormatError(f"{source}: checkpoint header does not describe a valid configuration: {e}") from e


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise ConfigError(f"checkpoint not found: {path}") from e
    except OSError as e:
        raise FormatError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data, str(path))
