"""Seeded synthetic corpus: speaker splits, utterances and mixtures."""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Iterator

import numpy as np

from common.logging import get_logger
from csc.config import CorpusConfig
from csc.exceptions import ConfigurationError, RefusedOverwriteError
from csc.models import (
    CorpusManifest,
    ExampleRecord,
    MixtureExample,
    SpeakerRecord,
    Split,
    Utterance,
    UtteranceRecord,
)
from csc.simulation.base import derive_seed
from csc.simulation.mixing import mix_sources
from csc.simulation.speakers import HarmonicVoice, make_speaker

logger = get_logger("csc.synth")

MANIFEST_NAME = "manifest.json"
SCHEMA_NAME = "manifest.schema.json"
WAVEFORM_DIR = "waveforms"

_UTTERANCE_STREAM = 1
_EXAMPLE_STREAM = 2
_SPLIT_CODES: dict[str, int] = {"train": 0, "validation": 1, "test": 2}


def draw_sir(rng: np.random.Generator, low_db: float, high_db: float) -> float:
    return float(rng.uniform(low_db, high_db))


def _utterance_records(config: CorpusConfig) -> list[UtteranceRecord]:
    records: list[UtteranceRecord] = []
    layout: list[tuple[int, Split, int]] = []
    for speaker_id in range(config.train_speakers):
        layout.append((speaker_id, "train", config.utterances_per_speaker))
        layout.append((speaker_id, "validation", config.validation_utterances_per_speaker))
    for offset in range(config.test_speakers):
        layout.append((config.train_speakers + offset, "test", config.test_utterances_per_speaker))

    for speaker_id, split, count in layout:
        for index in range(count):
            records.append(
                UtteranceRecord(
                    utterance_id=f"{split[:2]}-s{speaker_id:03d}-u{index:02d}",
                    speaker_id=speaker_id,
                    split=split,
                    seed=derive_seed(config.seed, _UTTERANCE_STREAM, speaker_id, _SPLIT_CODES[split], index),
                )
            )
    return records


def _example_records(
    config: CorpusConfig,
    split: Split,
    utterances: list[UtteranceRecord],
    mixtures_per_utterance: int,
) -> list[ExampleRecord]:
    pool = [u for u in utterances if u.split == split]
    if not pool:
        return []
    if len({u.speaker_id for u in pool}) < config.sources:
        raise ConfigurationError(f"split {split!r} has fewer speakers than sources per mixture")

    examples: list[ExampleRecord] = []
    index = 0
    for target in pool:
        for _ in range(mixtures_per_utterance):
            seed = derive_seed(config.seed, _EXAMPLE_STREAM, _SPLIT_CODES[split], index)
            rng = np.random.default_rng(seed)
            chosen = [target]
            while len(chosen) < config.sources:
                candidate = pool[int(rng.integers(len(pool)))]
                if candidate.speaker_id not in {u.speaker_id for u in chosen}:
                    chosen.append(candidate)
            examples.append(
                ExampleRecord(
                    example_id=f"{split}-{index:05d}",
                    split=split,
                    speaker_ids=[u.speaker_id for u in chosen],
                    utterance_ids=[u.utterance_id for u in chosen],
                    sir_db=draw_sir(rng, config.sir_low_db, config.sir_high_db),
                    seed=seed,
                )
            )
            index += 1
    return examples


def build_manifest(config: CorpusConfig) -> CorpusManifest:
    speakers = [
        SpeakerRecord.from_speaker(make_speaker(config.seed, speaker_id, config.harmonics), "train")
        for speaker_id in range(config.train_speakers)
    ]
    speakers += [
        SpeakerRecord.from_speaker(make_speaker(config.seed, config.train_speakers + offset, config.harmonics), "test")
        for offset in range(config.test_speakers)
    ]
    utterances = _utterance_records(config)
    examples = (
        _example_records(config, "train", utterances, config.mixtures_per_utterance)
        + _example_records(config, "validation", utterances, config.eval_mixtures_per_utterance)
        + _example_records(config, "test", utterances, config.eval_mixtures_per_utterance)
    )
    return CorpusManifest(
        corpus_seed=config.seed,
        sample_rate=config.sample_rate,
        duration_s=config.duration_s,
        sources=config.sources,
        sir_low_db=config.sir_low_db,
        sir_high_db=config.sir_high_db,
        waveforms_stored=config.store_waveforms,
        speakers=speakers,
        utterances=utterances,
        examples=examples,
    )


class Corpus:
    """Manifest plus on-demand waveforms, rendered from seeds or read from disk."""

    def __init__(self, manifest: CorpusManifest, waveform_dir: Path | None = None) -> None:
        self.manifest = manifest
        self._speakers = {record.speaker_id: record.to_speaker() for record in manifest.speakers}
        self._utterances = {record.utterance_id: record for record in manifest.utterances}
        self._waveform_dir = waveform_dir
        self._cache: dict[str, Utterance] = {}

    @property
    def train_speaker_ids(self) -> list[int]:
        return self.manifest.speaker_ids("train")

    @property
    def test_speaker_ids(self) -> list[int]:
        return self.manifest.speaker_ids("test")

    def records(self, split: Split) -> list[ExampleRecord]:
        return self.manifest.examples_for(split)

    def utterance(self, utterance_id: str) -> Utterance:
        cached = self._cache.get(utterance_id)
        if cached is not None:
            return cached
        record = self._utterances.get(utterance_id)
        if record is None:
            raise ConfigurationError(f"unknown utterance {utterance_id!r}")
        if self._waveform_dir is not None:
            samples = np.fromfile(self._waveform_dir / f"{utterance_id}.f64", dtype="<f8")
            utterance = Utterance(
                utterance_id=utterance_id,
                speaker_id=record.speaker_id,
                sample_rate=self.manifest.sample_rate,
                samples=samples.astype(np.float64),
            )
        else:
            voice = HarmonicVoice(self._speakers[record.speaker_id], self.manifest.sample_rate, record.seed)
            utterance = voice.render(self.manifest.duration_s, utterance_id)
        self._cache[utterance_id] = utterance
        return utterance

    def example(self, record: ExampleRecord) -> MixtureExample:
        target, *interferers = (self.utterance(u) for u in record.utterance_ids)
        return mix_sources(target, interferers, record.sir_db, example_id=record.example_id)

    def examples(self, split: Split) -> Iterator[MixtureExample]:
        for record in self.records(split):
            yield self.example(record)

    def speaker_groups(self, split: Split) -> dict[int, list[str]]:
        """Weak-supervision view: example ids containing each speaker."""
        groups: dict[int, list[str]] = defaultdict(list)
        for record in self.records(split):
            for speaker_id in record.speaker_ids:
                groups[speaker_id].append(record.example_id)
        return dict(groups)


def build_corpus(config: CorpusConfig) -> Corpus:
    manifest = build_manifest(config)
    logger.info(
        "Corpus manifest built",
        extra={
            "event": "csc.synth.manifest_built",
            "context": {
                "train_speakers": config.train_speakers,
                "test_speakers": config.test_speakers,
                "examples": len(manifest.examples),
                "seed": config.seed,
            },
        },
    )
    return Corpus(manifest)


def write_corpus(corpus: Corpus, directory: str | Path, *, force: bool = False) -> Path:
    target = Path(directory)
    manifest_path = target / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise RefusedOverwriteError(f"corpus already exists at {target}; pass --force to overwrite")
    target.mkdir(parents=True, exist_ok=True)

    if corpus.manifest.waveforms_stored:
        waveform_dir = target / WAVEFORM_DIR
        waveform_dir.mkdir(exist_ok=True)
        for record in corpus.manifest.utterances:
            corpus.utterance(record.utterance_id).samples.astype("<f8").tofile(waveform_dir / f"{record.utterance_id}.f64")

    manifest_path.write_text(corpus.manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    schema = json.dumps(CorpusManifest.model_json_schema(), indent=2, sort_keys=True)
    (target / SCHEMA_NAME).write_text(schema + "\n", encoding="utf-8")
    logger.info(
        "Corpus written",
        extra={
            "event": "csc.synth.corpus_written",
            "context": {"path": str(target), "examples": len(corpus.manifest.examples)},
        },
    )
    return manifest_path


def load_corpus(directory: str | Path) -> Corpus:
    target = Path(directory)
    manifest_path = target / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ConfigurationError(f"no corpus manifest at {manifest_path}")
    manifest = CorpusManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    waveform_dir = target / WAVEFORM_DIR if manifest.waveforms_stored else None
    return Corpus(manifest, waveform_dir=waveform_dir)


__all__ = [
    "Corpus",
    "build_corpus",
    "build_manifest",
    "draw_sir",
    "load_corpus",
    "write_corpus",
]
