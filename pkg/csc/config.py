"""Run configuration: TOML file, dotted overrides, environment, validation."""

from __future__ import annotations

import os
import tomllib
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from csc.exceptions import ConfigurationError

SEED_ENV_VAR = "CSC_SEED"

PoolingKind = Literal["attention", "mean"]
ContrastiveKind = Literal["csc", "infonce"]
TrialCondition = Literal["mix", "clean"]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


class CorpusConfig(_Section):
    train_speakers: int = 8
    test_speakers: int = 4
    utterances_per_speaker: int = 5
    validation_utterances_per_speaker: int = 3
    test_utterances_per_speaker: int = 6
    mixtures_per_utterance: int = 5
    eval_mixtures_per_utterance: int = 2
    duration_s: float = 1.0
    sample_rate: int = 8000
    sources: int = 2
    sir_low_db: float = 0.0
    sir_high_db: float = 5.0
    harmonics: int = 8
    seed: int = 0
    store_waveforms: bool = False

    @field_validator("train_speakers")
    @classmethod
    def _validate_speakers(cls, value: int) -> int:
        if value < 2:
            raise ValueError("train_speakers must be at least 2")
        return value

    @field_validator(
        "utterances_per_speaker",
        "mixtures_per_utterance",
        "eval_mixtures_per_utterance",
        "sample_rate",
        "harmonics",
    )
    @classmethod
    def _validate_positive_int(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("value must be positive")
        return value

    @field_validator("test_speakers", "validation_utterances_per_speaker", "test_utterances_per_speaker")
    @classmethod
    def _validate_non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("value must not be negative")
        return value

    @field_validator("duration_s")
    @classmethod
    def _validate_duration(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("duration_s must be positive")
        return value

    @field_validator("sources")
    @classmethod
    def _validate_sources(cls, value: int) -> int:
        if not 2 <= value <= 4:
            raise ValueError("sources must be between 2 and 4")
        return value

    @model_validator(mode="after")
    def _validate_layout(self) -> "CorpusConfig":
        if self.sir_low_db > self.sir_high_db:
            raise ValueError("sir_low_db must not exceed sir_high_db")
        if self.train_speakers < self.sources:
            raise ValueError("train_speakers must be at least the number of sources")
        if 0 < self.test_speakers < self.sources:
            raise ValueError("test_speakers must be zero or at least the number of sources")
        return self

    @property
    def samples_per_utterance(self) -> int:
        return int(round(self.duration_s * self.sample_rate))


class ModelConfig(_Section):
    feature_dim: int = 16
    segment_length: int = 16
    window: int = 8
    hop: int = 4
    blocks_enc: int = 2
    blocks_spk: int = 1
    blocks_ss: int = 1
    q: int = 16
    alpha_init: float = 1.0
    attention_temperature: float = 1.0
    pooling: PoolingKind = "attention"

    @field_validator("feature_dim", "window", "hop")
    @classmethod
    def _validate_positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("value must be positive")
        return value

    @field_validator("segment_length")
    @classmethod
    def _validate_segment_length(cls, value: int) -> int:
        if value <= 0 or value % 2:
            raise ValueError("segment_length must be a positive even number")
        return value

    @field_validator("blocks_enc", "blocks_spk", "blocks_ss")
    @classmethod
    def _validate_blocks(cls, value: int) -> int:
        if value < 0:
            raise ValueError("block counts must not be negative")
        return value

    @field_validator("alpha_init", "attention_temperature")
    @classmethod
    def _validate_strictly_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("value must be positive")
        return value

    @model_validator(mode="after")
    def _validate_framing(self) -> "ModelConfig":
        if self.hop > self.window:
            raise ValueError("hop must not exceed window")
        return self


class TrainConfig(_Section):
    lam: float = Field(default=10.0, alias="lambda")
    pit_switch_epoch: int = 3
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 4
    epochs: int = 10
    seed: int = 0
    contrastive_loss: ContrastiveKind = "csc"

    @field_validator("lam")
    @classmethod
    def _validate_lambda(cls, value: float) -> float:
        if value < 0:
            raise ValueError("lambda must not be negative")
        return value

    @field_validator("pit_switch_epoch", "batch_size")
    @classmethod
    def _validate_at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("value must be at least 1")
        return value

    @field_validator("epochs")
    @classmethod
    def _validate_epochs(cls, value: int) -> int:
        if value < 0:
            raise ValueError("epochs must not be negative")
        return value

    @field_validator("lr", "eps")
    @classmethod
    def _validate_rate(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("value must be positive")
        return value

    @field_validator("beta1", "beta2")
    @classmethod
    def _validate_beta(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("moment decay must lie in [0, 1)")
        return value


class EvalConfig(_Section):
    condition: TrialCondition = "mix"
    enrollment_fraction: float = 0.5
    seed: int = 0
    output_dir: str = "runs/desk"

    @field_validator("enrollment_fraction")
    @classmethod
    def _validate_fraction(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("enrollment_fraction must lie strictly between 0 and 1")
        return value


class RunConfig(_Section):
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return self.model_copy(
            update={
                "corpus": self.corpus.model_copy(update={"seed": seed}),
                "train": self.train.model_copy(update={"seed": seed}),
            }
        )

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


def parse_override(raw: str) -> tuple[list[str], Any]:
    """Split ``section.key=value`` and decode the value as a TOML literal when possible."""

    if "=" not in raw:
        raise ConfigurationError(f"override {raw!r} must look like section.key=value")
    dotted, _, value_text = raw.partition("=")
    path = [part.strip() for part in dotted.split(".") if part.strip()]
    if len(path) < 2:
        raise ConfigurationError(f"override {raw!r} must name a section and a key")
    try:
        value = tomllib.loads(f"value = {value_text.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = value_text.strip()
    return path, value


def _apply_override(document: dict[str, Any], path: Sequence[str], value: Any) -> None:
    node = document
    for key in path[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"override path {'.'.join(path)} crosses a scalar value")
        node = child
    node[path[-1]] = value


def load_run_config(
    path: str | Path | None = None,
    *,
    overrides: Sequence[str] = (),
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Build a validated :class:`RunConfig` from file, overrides and environment."""

    document: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigurationError(f"config file not found: {config_path}")
        try:
            document = tomllib.loads(config_path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"config file {config_path} is not valid TOML: {exc}") from exc

    for raw in overrides:
        override_path, value = parse_override(raw)
        _apply_override(document, override_path, value)

    try:
        config = RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid run configuration: {exc}") from exc

    env = os.environ if environ is None else environ
    raw_seed = env.get(SEED_ENV_VAR)
    if raw_seed is not None:
        try:
            seed = int(raw_seed)
        except ValueError as exc:
            raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {raw_seed!r}") from exc
        config = config.with_seed(seed)
    return config


def write_effective_config(config: RunConfig, directory: str | Path) -> Path:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    destination = target / "effective_config.json"
    destination.write_text(config.to_json() + "\n", encoding="utf-8")
    return destination


__all__ = [
    "ContrastiveKind",
    "CorpusConfig",
    "EvalConfig",
    "ModelConfig",
    "PoolingKind",
    "RunConfig",
    "SEED_ENV_VAR",
    "TrainConfig",
    "TrialCondition",
    "load_run_config",
    "parse_override",
    "write_effective_config",
]
