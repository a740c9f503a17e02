"""Shared fakes and small configurations for the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from csc.config import RunConfig
from csc.models import EpochSummary, StepMetrics
from csc.training.metrics_sink import TrainingDiagnostic


class InMemoryMetricsSink:
    """Collects training records instead of writing JSONL files."""

    def __init__(self) -> None:
        self.steps: list[StepMetrics] = []
        self.epochs: list[EpochSummary] = []
        self.diagnostics: list[TrainingDiagnostic] = []

    def write_step(self, record: StepMetrics) -> None:
        self.steps.append(record)

    def write_epoch(self, record: EpochSummary) -> None:
        self.epochs.append(record)

    def write_diagnostic(self, record: TrainingDiagnostic) -> None:
        self.diagnostics.append(record)

    def truncate_after(self, epoch: int) -> None:
        self.steps = [record for record in self.steps if record.epoch <= epoch]
        self.epochs = [record for record in self.epochs if record.epoch <= epoch]

    def loss_trace(self) -> list[tuple[int, int, float, float, float]]:
        return [(s.epoch, s.step, s.si_snr_loss, s.csc_loss, s.total) for s in self.steps]


TINY_DOCUMENT: dict[str, Any] = {
    "corpus": {
        "train_speakers": 3,
        "test_speakers": 2,
        "utterances_per_speaker": 2,
        "validation_utterances_per_speaker": 1,
        "test_utterances_per_speaker": 2,
        "mixtures_per_utterance": 1,
        "eval_mixtures_per_utterance": 1,
        "duration_s": 0.03,
        "sample_rate": 8000,
    },
    "model": {"feature_dim": 16, "segment_length": 8, "blocks_enc": 1, "blocks_spk": 1, "blocks_ss": 1},
    "train": {"pit_switch_epoch": 2, "batch_size": 2, "epochs": 2},
    "eval": {"output_dir": "runs/test"},
}


def tiny_config(**sections: dict[str, Any]) -> RunConfig:
    """The tiny run configuration with per-section key overrides."""
    document = {name: dict(values) for name, values in TINY_DOCUMENT.items()}
    for name, values in sections.items():
        document.setdefault(name, {}).update(values)
    return RunConfig.model_validate(document)


@dataclass
class FakeMixture:
    """Anything with a mixture, its sources and their speakers can be trained on."""

    mixture: np.ndarray
    sources: list[np.ndarray]
    speaker_ids: list[int]
    example_id: str = "fake-00000"
    extra: dict[str, Any] = field(default_factory=dict)


def harmonic_sources(count: int, length: int = 240, seed: int = 0) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    t = np.arange(length) / 8000.0
    sources = []
    for _ in range(count):
        f0 = rng.uniform(100.0, 300.0)
        sources.append(0.5 * np.sin(2 * np.pi * f0 * t) + 0.2 * np.sin(2 * np.pi * 2 * f0 * t + rng.uniform(0, np.pi)))
    return sources


def fake_mixture(count: int = 2, speaker_ids: list[int] | None = None, length: int = 240, seed: int = 0) -> FakeMixture:
    sources = harmonic_sources(count, length, seed)
    return FakeMixture(
        mixture=np.sum(sources, axis=0),
        sources=sources,
        speaker_ids=list(range(count)) if speaker_ids is None else speaker_ids,
    )


__all__ = ["FakeMixture", "InMemoryMetricsSink", "TINY_DOCUMENT", "fake_mixture", "harmonic_sources", "tiny_config"]
