from __future__ import annotations

import json

import numpy as np
import pytest

from csc.exceptions import CheckpointError, CheckpointVersionError
from csc.persistence import (
    CHECKPOINT_FORMAT_VERSION,
    checkpoint_dir_for,
    latest_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from csc.simulation.corpus import build_corpus
from csc.training.state import build_training_state
from csc.training.trainer import train
from tests.helpers import InMemoryMetricsSink, tiny_config

pytestmark = pytest.mark.unit


@pytest.fixture(scope="module")
def tiny_corpus():
    return build_corpus(tiny_config().corpus)


@pytest.fixture()
def trained_state(tiny_corpus):
    return train(tiny_config(train={"epochs": 1}), tiny_corpus, InMemoryMetricsSink())


def _parameters(state) -> dict[str, np.ndarray]:
    return {name: tensor.data.copy() for name, tensor in state.optimizer.parameters.items()}


def test_save_load_save_is_byte_identical(tmp_path, trained_state) -> None:
    first = save_checkpoint(trained_state, tmp_path / "a")
    restored = load_checkpoint(first)
    second = save_checkpoint(restored, tmp_path / "b")
    for name in ("manifest.json", "tensors.bin"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_loaded_state_matches_the_saved_one(tmp_path, trained_state) -> None:
    restored = load_checkpoint(save_checkpoint(trained_state, tmp_path))
    assert restored.epoch == trained_state.epoch
    assert restored.optimizer.step_count == trained_state.optimizer.step_count
    assert restored.pit_history == trained_state.pit_history
    assert restored.config == trained_state.config
    expected = _parameters(trained_state)
    for name, value in _parameters(restored).items():
        np.testing.assert_array_equal(value, expected[name])
    np.testing.assert_array_equal(restored.bank.updated, trained_state.bank.updated)


def test_checkpoint_layout(tmp_path, trained_state) -> None:
    directory = save_checkpoint(trained_state, tmp_path)
    assert directory == checkpoint_dir_for(tmp_path, 1) == tmp_path / "epoch_0001"
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["format_version"] == CHECKPOINT_FORMAT_VERSION
    assert manifest["dtype"] == "<f8"
    total = sum(entry["count"] for entry in manifest["tensors"])
    assert (directory / "tensors.bin").stat().st_size == 8 * total
    assert any(entry["name"].startswith("param.model.") for entry in manifest["tensors"])
    assert any(entry["name"].startswith("adam.") for entry in manifest["tensors"])


def test_version_mismatch_is_rejected(tmp_path, trained_state) -> None:
    directory = save_checkpoint(trained_state, tmp_path)
    path = directory / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest["format_version"] = CHECKPOINT_FORMAT_VERSION + 1
    path.write_text(json.dumps(manifest), encoding="utf-8")
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(directory)


def test_missing_or_truncated_files_are_rejected(tmp_path, trained_state) -> None:
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nowhere")
    directory = save_checkpoint(trained_state, tmp_path)
    blob = directory / "tensors.bin"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(CheckpointError, match="manifest lists"):
        load_checkpoint(directory)


def test_shape_mismatch_against_override_config(tmp_path, trained_state) -> None:
    directory = save_checkpoint(trained_state, tmp_path)
    with pytest.raises(CheckpointError):
        load_checkpoint(directory, config=tiny_config(model={"feature_dim": 8}))


def test_latest_checkpoint_picks_the_highest_epoch(tmp_path) -> None:
    assert latest_checkpoint(tmp_path / "missing") is None
    assert latest_checkpoint(tmp_path) is None
    state = build_training_state(tiny_config())
    for epoch in (1, 3, 2):
        state.epoch = epoch
        save_checkpoint(state, tmp_path)
    (tmp_path / "epoch_0009").mkdir()
    assert latest_checkpoint(tmp_path) == tmp_path / "epoch_0003"


def test_resumed_run_matches_an_uninterrupted_one(tmp_path, tiny_corpus) -> None:
    full_sink = InMemoryMetricsSink()
    full = train(tiny_config(), tiny_corpus, full_sink, checkpoint_root=tmp_path / "full")

    resumed_sink = InMemoryMetricsSink()
    train(tiny_config(train={"epochs": 1}), tiny_corpus, resumed_sink, checkpoint_root=tmp_path / "split")
    resumed = train(tiny_config(), tiny_corpus, resumed_sink, checkpoint_root=tmp_path / "split", resume=True)

    assert resumed.epoch == full.epoch == 2
    assert resumed_sink.loss_trace() == full_sink.loss_trace()
    expected = _parameters(full)
    for name, value in _parameters(resumed).items():
        np.testing.assert_array_equal(value, expected[name])
    assert latest_checkpoint(tmp_path / "split") == tmp_path / "split" / "epoch_0002"


def test_resume_without_checkpoints_starts_fresh(tmp_path, tiny_corpus) -> None:
    sink = InMemoryMetricsSink()
    state = train(tiny_config(train={"epochs": 1}), tiny_corpus, sink, checkpoint_root=tmp_path, resume=True)
    assert state.epoch == 1
    assert [record.epoch for record in sink.epochs] == [1]
