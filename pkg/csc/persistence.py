"""Checkpoint storage: a JSON manifest next to one little-endian f64 blob."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from common.logging import get_logger
from csc.config import RunConfig
from csc.exceptions import CheckpointError, CheckpointVersionError
from csc.training.state import TrainingState, build_training_state

logger = get_logger("csc.checkpoint")

CHECKPOINT_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
TENSORS_NAME = "tensors.bin"
DTYPE = "<f8"

_PARAM_PREFIX = "param."
_BANK_PREFIX = "bank_state."
_ADAM_PREFIX = "adam."


class TensorEntry(BaseModel):
    name: str
    shape: list[int]
    offset: int
    count: int

    model_config = ConfigDict(frozen=True)


class CheckpointManifest(BaseModel):
    format_version: int
    dtype: str = DTYPE
    epoch: int
    adam_step: int
    seed: int
    config: dict[str, Any]
    pit_history: dict[str, list[int]]
    tensors: list[TensorEntry]

    model_config = ConfigDict(frozen=True)


def checkpoint_dir_for(root: str | Path, epoch: int) -> Path:
    return Path(root) / f"epoch_{epoch:04d}"


def _state_tensors(state: TrainingState) -> list[tuple[str, np.ndarray]]:
    arrays = [(f"{_PARAM_PREFIX}{name}", tensor.data) for name, tensor in state.optimizer.parameters.items()]
    arrays += [(f"{_BANK_PREFIX}{name}", value) for name, value in state.bank.state_arrays().items()]
    arrays += [(f"{_ADAM_PREFIX}{name}", value) for name, value in state.optimizer.state_arrays().items()]
    return arrays


def save_checkpoint(state: TrainingState, root: str | Path) -> Path:
    """Write ``<root>/epoch_NNNN/{manifest.json,tensors.bin}`` for the state's epoch."""

    directory = checkpoint_dir_for(root, state.epoch)
    directory.mkdir(parents=True, exist_ok=True)
    entries: list[TensorEntry] = []
    chunks: list[bytes] = []
    offset = 0
    for name, value in _state_tensors(state):
        array = np.ascontiguousarray(value, dtype=DTYPE)
        entries.append(TensorEntry(name=name, shape=list(array.shape), offset=offset, count=int(array.size)))
        chunks.append(array.tobytes())
        offset += int(array.size)

    manifest = CheckpointManifest(
        format_version=CHECKPOINT_FORMAT_VERSION,
        epoch=state.epoch,
        adam_step=state.optimizer.step_count,
        seed=state.config.train.seed,
        config=json.loads(state.config.model_dump_json(by_alias=True)),
        pit_history={key: list(value) for key, value in sorted(state.pit_history.items())},
        tensors=entries,
    )
    (directory / TENSORS_NAME).write_bytes(b"".join(chunks))
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest.model_dump(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    logger.info(
        "checkpoint written",
        extra={"event": "csc.checkpoint.saved", "epoch": state.epoch, "context": {"path": str(directory)}},
    )
    return directory


def _read_manifest(directory: Path) -> CheckpointManifest:
    path = directory / MANIFEST_NAME
    if not path.exists():
        raise CheckpointError(f"no checkpoint manifest at {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint manifest {path} is not valid JSON") from exc
    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint {directory} has format version {version!r}, expected {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        return CheckpointManifest.model_validate(raw)
    except ValidationError as exc:
        raise CheckpointError(f"checkpoint manifest {path} is malformed: {exc}") from exc


def load_checkpoint(directory: str | Path, *, config: RunConfig | None = None) -> TrainingState:
    """Rebuild the training state saved in ``directory``.

    A ``config`` replaces the stored one, e.g. to extend the epoch budget of a
    resumed run; its shapes must match the stored tensors.
    """

    directory = Path(directory)
    manifest = _read_manifest(directory)
    if manifest.dtype != DTYPE:
        raise CheckpointError(f"unsupported tensor dtype {manifest.dtype!r}")
    blob_path = directory / TENSORS_NAME
    if not blob_path.exists():
        raise CheckpointError(f"no tensor blob at {blob_path}")
    blob = np.frombuffer(blob_path.read_bytes(), dtype=DTYPE)
    expected = sum(entry.count for entry in manifest.tensors)
    if blob.size != expected:
        raise CheckpointError(f"tensor blob holds {blob.size} values, manifest lists {expected}")

    arrays = {
        entry.name: blob[entry.offset : entry.offset + entry.count].reshape(entry.shape).astype(np.float64)
        for entry in manifest.tensors
    }
    if config is None:
        try:
            config = RunConfig.model_validate(manifest.config)
        except ValidationError as exc:
            raise CheckpointError(f"checkpoint config is invalid: {exc}") from exc

    state = build_training_state(config)
    for name, tensor in state.optimizer.parameters.items():
        key = f"{_PARAM_PREFIX}{name}"
        if key not in arrays:
            raise CheckpointError(f"checkpoint lacks parameter {name}")
        if arrays[key].shape != tensor.shape:
            raise CheckpointError(f"parameter {name} has shape {arrays[key].shape}, model expects {tensor.shape}")
        tensor.data[...] = arrays[key]

    bank_arrays = {k[len(_BANK_PREFIX) :]: v for k, v in arrays.items() if k.startswith(_BANK_PREFIX)}
    if set(bank_arrays) != set(state.bank.state_arrays()):
        raise CheckpointError("checkpoint bank state is incomplete")
    state.bank.load_state_arrays(bank_arrays)
    adam_arrays = {k[len(_ADAM_PREFIX) :]: v for k, v in arrays.items() if k.startswith(_ADAM_PREFIX)}
    state.optimizer.load_state_arrays(adam_arrays, manifest.adam_step)
    state.epoch = manifest.epoch
    state.pit_history = {key: tuple(value) for key, value in manifest.pit_history.items()}
    return state


def latest_checkpoint(root: str | Path) -> Path | None:
    root = Path(root)
    if not root.is_dir():
        return None
    candidates = sorted(path for path in root.glob("epoch_*") if (path / MANIFEST_NAME).exists())
    return candidates[-1] if candidates else None


__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "CheckpointManifest",
    "TensorEntry",
    "checkpoint_dir_for",
    "latest_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
