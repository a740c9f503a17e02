from __future__ import annotations

import json

import numpy as np
import pytest

from csc.config import CorpusConfig
from csc.exceptions import ConfigurationError, DegenerateSignalError, RefusedOverwriteError
from csc.models import Utterance
from csc.simulation import build_corpus, build_manifest, load_corpus, make_speaker, render_utterance, write_corpus
from csc.simulation.base import derive_seed
from csc.simulation.mixing import achieved_sir_db, interferer_gain, mix_at_sir, mix_sources
from csc.simulation.speakers import PEAK_LEVEL

pytestmark = pytest.mark.unit

SMALL_CORPUS = CorpusConfig(
    train_speakers=4,
    test_speakers=2,
    utterances_per_speaker=2,
    validation_utterances_per_speaker=1,
    test_utterances_per_speaker=2,
    mixtures_per_utterance=2,
    eval_mixtures_per_utterance=1,
    duration_s=0.05,
)


def _utterance(speaker_id: int, seed: int = 0, duration_s: float = 0.1) -> Utterance:
    return render_utterance(make_speaker(0, speaker_id), duration_s, seed)


def test_speakers_are_pure_functions_of_seed_and_id() -> None:
    assert make_speaker(3, 5) == make_speaker(3, 5)
    assert make_speaker(3, 5) != make_speaker(3, 6)
    assert make_speaker(3, 5) != make_speaker(4, 5)


def test_harmonic_amplitudes_have_unit_norm() -> None:
    speaker = make_speaker(0, 1, harmonics=6)
    assert len(speaker.harmonic_amplitudes) == 6
    assert np.linalg.norm(speaker.harmonic_amplitudes) == pytest.approx(1.0, abs=1e-12)
    assert 0 < speaker.f0_low < speaker.f0_high


def test_rendered_utterance_is_deterministic_and_peak_normalised() -> None:
    first = _utterance(2, seed=7)
    second = _utterance(2, seed=7)
    np.testing.assert_array_equal(first.samples, second.samples)
    assert first.samples.size == 800
    assert float(np.max(np.abs(first.samples))) == pytest.approx(PEAK_LEVEL)
    assert not np.array_equal(first.samples, _utterance(2, seed=8).samples)


def test_render_rejects_non_positive_duration() -> None:
    with pytest.raises(ConfigurationError):
        render_utterance(make_speaker(0, 1), 0.0, 1)


@pytest.mark.parametrize("sir_db", [0.0, 2.5, 5.0, -3.0])
def test_mixture_hits_requested_sir_and_sums_exactly(sir_db: float) -> None:
    example = mix_at_sir(_utterance(0), _utterance(1), sir_db, example_id="x")
    assert achieved_sir_db(example.sources[0], example.sources[1]) == pytest.approx(sir_db, abs=1e-9)
    np.testing.assert_array_equal(example.mixture - (example.sources[0] + example.sources[1]), 0.0)
    assert example.speaker_ids == (0, 1)


def test_three_source_mixture_scales_every_interferer() -> None:
    example = mix_sources(_utterance(0), [_utterance(1), _utterance(2)], 3.0)
    assert example.num_sources == 3
    for interferer in example.sources[1:]:
        assert achieved_sir_db(example.sources[0], interferer) == pytest.approx(3.0, abs=1e-9)


def test_mixing_rejects_repeated_speaker() -> None:
    with pytest.raises(ConfigurationError):
        mix_at_sir(_utterance(0, seed=1), _utterance(0, seed=2), 0.0)


def test_interferer_gain_rejects_silence() -> None:
    with pytest.raises(DegenerateSignalError):
        interferer_gain(1.0, 0.0, 0.0)


def test_derive_seed_is_stable_and_distinguishes_streams() -> None:
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert 0 <= derive_seed(0) < 2**63


def test_manifest_splits_are_disjoint_and_counted() -> None:
    manifest = build_manifest(SMALL_CORPUS)
    train = set(manifest.speaker_ids("train"))
    test = set(manifest.speaker_ids("test"))
    assert train == {0, 1, 2, 3}
    assert test == {4, 5}
    assert len(manifest.examples_for("train")) == 4 * 2 * 2
    assert len(manifest.examples_for("validation")) == 4 * 1 * 1
    assert len(manifest.examples_for("test")) == 2 * 2 * 1
    for record in manifest.examples_for("train") + manifest.examples_for("validation"):
        assert set(record.speaker_ids) <= train
    for record in manifest.examples_for("test"):
        assert set(record.speaker_ids) <= test
        assert SMALL_CORPUS.sir_low_db <= record.sir_db <= SMALL_CORPUS.sir_high_db


def test_manifest_is_reproducible_from_seed() -> None:
    assert build_manifest(SMALL_CORPUS) == build_manifest(SMALL_CORPUS)
    other = build_manifest(SMALL_CORPUS.model_copy(update={"seed": 1}))
    assert other.examples != build_manifest(SMALL_CORPUS).examples


def test_corpus_examples_render_from_records() -> None:
    corpus = build_corpus(SMALL_CORPUS)
    record = corpus.records("train")[0]
    example = corpus.example(record)
    assert example.example_id == record.example_id
    assert list(example.speaker_ids) == record.speaker_ids
    assert example.mixture.shape == (SMALL_CORPUS.samples_per_utterance,)
    groups = corpus.speaker_groups("train")
    assert record.example_id in groups[record.speaker_ids[1]]


def test_write_and_load_round_trip(tmp_path) -> None:
    corpus = build_corpus(SMALL_CORPUS)
    manifest_path = write_corpus(corpus, tmp_path / "corpus")
    assert json.loads(manifest_path.read_text(encoding="utf-8"))["corpus_seed"] == 0
    assert (tmp_path / "corpus" / "manifest.schema.json").is_file()
    loaded = load_corpus(tmp_path / "corpus")
    assert loaded.manifest == corpus.manifest
    record = corpus.records("test")[0]
    np.testing.assert_array_equal(loaded.example(record).mixture, corpus.example(record).mixture)


def test_stored_waveforms_are_read_back(tmp_path) -> None:
    corpus = build_corpus(SMALL_CORPUS.model_copy(update={"store_waveforms": True}))
    write_corpus(corpus, tmp_path)
    loaded = load_corpus(tmp_path)
    utterance_id = corpus.manifest.utterances[0].utterance_id
    np.testing.assert_array_equal(loaded.utterance(utterance_id).samples, corpus.utterance(utterance_id).samples)


def test_write_refuses_to_overwrite_without_force(tmp_path) -> None:
    corpus = build_corpus(SMALL_CORPUS)
    write_corpus(corpus, tmp_path)
    with pytest.raises(RefusedOverwriteError):
        write_corpus(corpus, tmp_path)
    write_corpus(corpus, tmp_path, force=True)


def test_load_without_manifest_fails(tmp_path) -> None:
    with pytest.raises(ConfigurationError):
        load_corpus(tmp_path)
