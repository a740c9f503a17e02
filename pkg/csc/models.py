from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from csc.exceptions import ConfigurationError, ShapeError

Split = Literal["train", "validation", "test"]


@dataclass(frozen=True)
class SyntheticSpeaker:
    speaker_id: int
    f0_low: float
    f0_high: float
    harmonic_amplitudes: tuple[float, ...]
    vibrato_rate: float
    vibrato_depth: float
    syllable_rate: float
    seed: int

    def __post_init__(self) -> None:
        if self.speaker_id < 0:
            raise ConfigurationError("speaker_id must not be negative")
        if not 0 < self.f0_low < self.f0_high:
            raise ConfigurationError("fundamental range must satisfy 0 < f0_low < f0_high")
        if not self.harmonic_amplitudes:
            raise ConfigurationError("a speaker needs at least one harmonic")
        norm = float(np.linalg.norm(self.harmonic_amplitudes))
        if abs(norm - 1.0) > 1e-9:
            raise ConfigurationError(f"harmonic amplitudes must have unit L2 norm, got {norm}")


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    speaker_id: int
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ShapeError("utterance samples must be a non-empty 1-D waveform")
        if float(np.max(np.abs(self.samples))) > 1.0:
            raise ConfigurationError("utterance peak exceeds 1.0")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class MixtureExample:
    """A mixture and the scaled sources it is the exact sum of."""

    example_id: str
    mixture: np.ndarray
    sources: tuple[np.ndarray, ...]
    speaker_ids: tuple[int, ...]
    utterance_ids: tuple[str, ...]
    sir_db: float
    sample_rate: int

    def __post_init__(self) -> None:
        if len(self.sources) < 2:
            raise ConfigurationError("a mixture needs at least two sources")
        if len(self.speaker_ids) != len(self.sources):
            raise ConfigurationError("one speaker id per source is required")
        if len(set(self.speaker_ids)) != len(self.speaker_ids):
            raise ConfigurationError("speaker ids within a mixture must be distinct")
        if any(source.shape != self.mixture.shape for source in self.sources):
            raise ShapeError("sources and mixture must have equal lengths")

    @property
    def num_sources(self) -> int:
        return len(self.sources)


class PitMode(str, Enum):
    SPEECH = "speech-loss-PIT"
    SPEAKER = "speaker-loss-PIT"


@dataclass(frozen=True)
class PitAssignment:
    """Estimate ``c`` is labelled with source ``permutation[c]``."""

    permutation: tuple[int, ...]
    value: float
    mode: PitMode = PitMode.SPEECH

    def __post_init__(self) -> None:
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ConfigurationError(f"{self.permutation} is not a permutation")


@dataclass(frozen=True)
class Trial:
    trial_id: int
    label: bool
    score: float
    enrollment_speaker: int
    probe_id: str
    probe_speaker: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ConfigurationError("trial score must be finite")


@dataclass
class TrialSet:
    trials: list[Trial]
    enrollment_ids: dict[int, list[str]] = field(default_factory=dict)
    probe_ids: dict[int, list[str]] = field(default_factory=dict)

    @property
    def n_target(self) -> int:
        return sum(1 for trial in self.trials if trial.label)

    @property
    def n_nontarget(self) -> int:
        return sum(1 for trial in self.trials if not trial.label)


# Corpus manifest


class SpeakerRecord(BaseModel):
    speaker_id: int
    split: Literal["train", "test"]
    f0_low: float
    f0_high: float
    harmonic_amplitudes: list[float]
    vibrato_rate: float
    vibrato_depth: float
    syllable_rate: float
    seed: int

    model_config = ConfigDict(frozen=True)

    @classmethod
    def from_speaker(cls, speaker: SyntheticSpeaker, split: Literal["train", "test"]) -> "SpeakerRecord":
        return cls(
            speaker_id=speaker.speaker_id,
            split=split,
            f0_low=speaker.f0_low,
            f0_high=speaker.f0_high,
            harmonic_amplitudes=list(speaker.harmonic_amplitudes),
            vibrato_rate=speaker.vibrato_rate,
            vibrato_depth=speaker.vibrato_depth,
            syllable_rate=speaker.syllable_rate,
            seed=speaker.seed,
        )

    def to_speaker(self) -> SyntheticSpeaker:
        return SyntheticSpeaker(
            speaker_id=self.speaker_id,
            f0_low=self.f0_low,
            f0_high=self.f0_high,
            harmonic_amplitudes=tuple(self.harmonic_amplitudes),
            vibrato_rate=self.vibrato_rate,
            vibrato_depth=self.vibrato_depth,
            syllable_rate=self.syllable_rate,
            seed=self.seed,
        )


class UtteranceRecord(BaseModel):
    utterance_id: str
    speaker_id: int
    split: Split
    seed: int

    model_config = ConfigDict(frozen=True)


class ExampleRecord(BaseModel):
    example_id: str
    split: Split
    speaker_ids: list[int]
    utterance_ids: list[str]
    sir_db: float
    seed: int

    model_config = ConfigDict(frozen=True)

    @field_validator("speaker_ids")
    @classmethod
    def _validate_speakers(cls, value: Sequence[int]) -> list[int]:
        if len(value) < 2:
            raise ValueError("an example mixes at least two speakers")
        if len(set(value)) != len(value):
            raise ValueError("speaker ids within an example must be distinct")
        return list(value)

    @model_validator(mode="after")
    def _validate_alignment(self) -> "ExampleRecord":
        if len(self.utterance_ids) != len(self.speaker_ids):
            raise ValueError("one utterance per speaker is required")
        return self

    @property
    def target_speaker(self) -> int:
        return self.speaker_ids[0]

    @property
    def target_utterance(self) -> str:
        return self.utterance_ids[0]


class CorpusManifest(BaseModel):
    format_version: int = 1
    corpus_seed: int
    sample_rate: int
    duration_s: float
    sources: int
    sir_low_db: float
    sir_high_db: float
    waveforms_stored: bool = False
    speakers: list[SpeakerRecord]
    utterances: list[UtteranceRecord]
    examples: list[ExampleRecord]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _validate_disjoint_splits(self) -> "CorpusManifest":
        train = {s.speaker_id for s in self.speakers if s.split == "train"}
        test = {s.speaker_id for s in self.speakers if s.split == "test"}
        if train & test:
            raise ValueError("train and test speaker sets must be disjoint")
        return self

    def speaker_ids(self, split: Literal["train", "test"]) -> list[int]:
        return [s.speaker_id for s in self.speakers if s.split == split]

    def examples_for(self, split: Split) -> list[ExampleRecord]:
        return [example for example in self.examples if example.split == split]


# Training and evaluation records


class StepMetrics(BaseModel):
    epoch: int
    step: int
    mode: PitMode
    si_snr_loss: float
    csc_loss: float
    reg_loss: float
    total: float
    pi_changed: int
    wall_ms: float
    permutation_evaluations: int = Field(default=0, ge=0)

    model_config = ConfigDict(frozen=True)


class EpochSummary(BaseModel):
    epoch: int
    mode: PitMode
    steps: int
    mean_si_snr_loss: float
    mean_csc_loss: float
    mean_reg_loss: float
    mean_total: float
    validation_si_snri_db: float | None = None
    mean_step_ms: float

    model_config = ConfigDict(frozen=True)


class EvalSummary(BaseModel):
    eer: float
    auc: float
    n_target: int
    n_nontarget: int
    condition: str

    model_config = ConfigDict(frozen=True)


__all__ = [
    "CorpusManifest",
    "EpochSummary",
    "EvalSummary",
    "ExampleRecord",
    "MixtureExample",
    "PitAssignment",
    "PitMode",
    "SpeakerRecord",
    "Split",
    "StepMetrics",
    "SyntheticSpeaker",
    "Trial",
    "TrialSet",
    "Utterance",
    "UtteranceRecord",
]
