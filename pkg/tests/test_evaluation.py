from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from csc.autodiff.tensor import Tensor
from csc.evaluation.attention import attention_trace, segment_energies, write_attention_csv
from csc.evaluation.metrics import eer, pair_counting_auc, roc, score_trial
from csc.evaluation.trials import ROC_NAME, SUMMARY_NAME, TRIALS_NAME, build_trials, evaluate, write_trials
from csc.exceptions import ConfigurationError, InsufficientEnrollmentError, ShapeError, SingleClassTrialsError
from csc.models import Trial
from csc.network.separator import SeparativeCodingModel
from csc.objectives.bank import GatedAggregator, GlobalSpeakerBank
from csc.objectives.contrastive import density_score
from csc.plots import attention_svg, roc_svg
from csc.simulation.corpus import build_corpus
from tests.helpers import tiny_config

pytestmark = pytest.mark.unit

HAND_SCORES = [3.0, 2.0, 1.0, 0.0, -1.0]
HAND_LABELS = [True, True, False, True, False]


def _trials(scores, labels) -> list[Trial]:
    return [
        Trial(trial_id=i, label=bool(label), score=float(score), enrollment_speaker=0, probe_id=f"p{i}", probe_speaker=0)
        for i, (score, label) in enumerate(zip(scores, labels))
    ]


def _dense_sweep_eer(scores, labels, resolution: float = 1e-6) -> float:
    """Walk the piecewise-linear operating curve in small steps and return the point where FNR meets FPR."""
    scores = np.asarray(scores)
    labels = np.asarray(labels, dtype=bool)
    points = [(0.0, 0.0)]
    for threshold in sorted(set(scores.tolist()), reverse=True):
        accepted = scores >= threshold
        points.append(
            (float(np.mean(accepted[~labels])), float(np.mean(accepted[labels])))
        )
    best_gap, best_rate = math.inf, math.nan
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        steps = max(1, int(round(max(abs(x1 - x0), abs(y1 - y0)) / resolution)))
        t = np.linspace(0.0, 1.0, steps + 1)
        fpr = x0 + t * (x1 - x0)
        fnr = 1.0 - (y0 + t * (y1 - y0))
        gaps = np.abs(fnr - fpr)
        index = int(np.argmin(gaps))
        if gaps[index] < best_gap:
            best_gap, best_rate = float(gaps[index]), float((fpr[index] + fnr[index]) / 2.0)
    return best_rate


# Scoring


def test_score_trial_hand_values() -> None:
    e = np.array([0.2, -0.4])
    assert score_trial(e, e) == 0.0
    assert score_trial(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == -2.0
    with pytest.raises(ShapeError):
        score_trial(np.zeros(2), np.zeros(3))


def test_score_order_matches_density_order() -> None:
    rng = np.random.default_rng(0)
    e = rng.normal(size=3)
    probes = rng.normal(size=(30, 3))
    scores = [score_trial(e, z) for z in probes]
    densities = [density_score(Tensor(z), Tensor(e), 0.4).item() for z in probes]
    assert np.argsort(scores).tolist() == np.argsort(densities).tolist()


# ROC, AUC, EER


def test_hand_case_against_oracles() -> None:
    trials = _trials(HAND_SCORES, HAND_LABELS)
    curve = roc(trials)
    assert curve.auc == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert curve.auc == pytest.approx(pair_counting_auc(trials), abs=1e-9)
    assert eer(trials) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert eer(trials) == pytest.approx(_dense_sweep_eer(HAND_SCORES, HAND_LABELS), abs=1e-5)
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0


def test_perfect_separation_and_identical_scores() -> None:
    separated = _trials([5.0, 4.0, 1.0, 0.0], [True, True, False, False])
    assert roc(separated).auc == 1.0
    assert eer(separated) == 0.0
    tied = _trials([1.0] * 6, [True, False] * 3)
    assert roc(tied).auc == pytest.approx(0.5)
    assert eer(tied) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(10))
def test_auc_matches_pair_counting_and_sklearn(seed: int) -> None:
    rng = np.random.default_rng(seed)
    size = int(rng.integers(5, 1000))
    labels = rng.random(size) < 0.5
    labels[0], labels[1] = True, False
    scores = np.round(rng.normal(size=size) + labels, 1)
    trials = _trials(scores, labels)
    auc = roc(trials).auc
    assert auc == pytest.approx(pair_counting_auc(trials), abs=1e-9)
    assert auc == pytest.approx(roc_auc_score(labels, scores), abs=1e-9)
    rate = eer(trials)
    assert 0.0 <= rate <= 1.0
    assert rate == pytest.approx(_dense_sweep_eer(scores, labels), abs=1e-5)


@pytest.mark.parametrize("transform", [lambda x: 2.0 * x + 1.0, np.tanh], ids=["affine", "tanh"])
def test_strictly_increasing_transforms_leave_metrics_unchanged(transform) -> None:
    rng = np.random.default_rng(3)
    labels = rng.random(200) < 0.4
    scores = rng.normal(size=200) + labels
    base = _trials(scores, labels)
    moved = _trials(transform(scores), labels)
    np.testing.assert_allclose(roc(moved).fpr, roc(base).fpr)
    np.testing.assert_allclose(roc(moved).tpr, roc(base).tpr)
    assert roc(moved).auc == pytest.approx(roc(base).auc, abs=1e-12)
    assert eer(moved) == pytest.approx(eer(base), abs=1e-12)


def test_coin_flip_labels_give_chance_auc() -> None:
    rng = np.random.default_rng(4)
    trials = _trials(rng.normal(size=10_000), rng.random(10_000) < 0.5)
    assert 0.47 <= roc(trials).auc <= 0.53


def test_dominating_targets_keep_eer_below_half() -> None:
    rng = np.random.default_rng(5)
    labels = rng.random(500) < 0.5
    trials = _trials(rng.normal(size=500) + 2.0 * labels, labels)
    assert 0.0 <= eer(trials) <= 0.5


def test_single_class_trials_are_rejected() -> None:
    with pytest.raises(SingleClassTrialsError):
        roc(_trials([1.0, 2.0], [True, True]))
    with pytest.raises(SingleClassTrialsError):
        eer(_trials([1.0, 2.0], [False, False]))


# Trial construction on unseen speakers


@pytest.fixture(scope="module")
def tiny_setup():
    config = tiny_config()
    corpus = build_corpus(config.corpus)
    model = SeparativeCodingModel(config.model, config.corpus.sources, seed=0)
    bank = GlobalSpeakerBank(config.corpus.train_speakers, config.model.feature_dim, seed=1)
    return config, corpus, model, bank.aggregator


def test_build_trials_properties(tiny_setup) -> None:
    _, corpus, model, aggregator = tiny_setup
    trial_set = build_trials(corpus, model, aggregator, seed=0)
    assert trial_set.n_target == trial_set.n_nontarget > 0
    assert set(trial_set.enrollment_ids) == set(corpus.test_speaker_ids)
    for speaker, enrolled in trial_set.enrollment_ids.items():
        assert not set(enrolled) & set(trial_set.probe_ids[speaker])
    for trial in trial_set.trials:
        assert trial.enrollment_speaker in corpus.test_speaker_ids
        assert trial.label == (trial.enrollment_speaker == trial.probe_speaker)
    assert [t.trial_id for t in trial_set.trials] == list(range(len(trial_set.trials)))


def test_trials_are_seeded_and_order_free(tiny_setup) -> None:
    _, corpus, model, aggregator = tiny_setup
    first = build_trials(corpus, model, aggregator, seed=3)
    second = build_trials(corpus, model, aggregator, seed=3)
    assert [t.score for t in first.trials] == [t.score for t in second.trials]
    shuffled = list(first.trials)
    np.random.default_rng(0).shuffle(shuffled)
    assert eer(shuffled) == pytest.approx(eer(first.trials), abs=1e-12)


def test_clean_condition_scores_target_utterances(tiny_setup) -> None:
    _, corpus, model, aggregator = tiny_setup
    trial_set = build_trials(corpus, model, aggregator, condition="clean")
    assert trial_set.n_target == trial_set.n_nontarget


def test_too_few_utterances_cannot_enroll_and_probe() -> None:
    config = tiny_config(corpus={"test_utterances_per_speaker": 1})
    corpus = build_corpus(config.corpus)
    model = SeparativeCodingModel(config.model, 2, seed=0)
    with pytest.raises(InsufficientEnrollmentError):
        build_trials(corpus, model, GatedAggregator(config.model.feature_dim, np.random.default_rng(0)))


def test_evaluate_writes_trials_roc_and_summary(tiny_setup, tmp_path) -> None:
    config, corpus, model, aggregator = tiny_setup
    trial_set, curve, summary = evaluate(corpus, model, aggregator, config.eval)
    write_trials(trial_set, curve, summary, tmp_path)
    with (tmp_path / TRIALS_NAME).open(encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == len(trial_set.trials)
    assert {row["label"] for row in rows} == {"0", "1"}
    payload = json.loads((tmp_path / SUMMARY_NAME).read_text(encoding="utf-8"))
    assert set(payload) == {"eer", "auc", "n_target", "n_nontarget", "condition"}
    assert payload["n_target"] == summary.n_target
    assert (tmp_path / ROC_NAME).read_text(encoding="utf-8").startswith("fpr,tpr,threshold")

    svg = roc_svg(curve, summary.eer, tmp_path / "roc.svg")
    text = svg.read_text(encoding="utf-8")
    assert 'id="roc"' in text and 'id="eer"' in text


# Attention curves


def test_attention_trace_curves_are_distributions(tiny_setup, tmp_path) -> None:
    config, corpus, model, _ = tiny_setup
    example = next(corpus.examples("test"))
    trace = attention_trace(model, example)
    assert trace.curves.shape == trace.energies.shape
    assert trace.curves.shape[0] == config.corpus.sources
    assert np.all(trace.curves >= 0.0)
    np.testing.assert_allclose(trace.curves.sum(axis=1), 1.0, atol=1e-9)
    assert 0.0 <= trace.dominance_agreement() <= 1.0
    assert sorted(trace.assignment) == list(range(config.corpus.sources))

    path = write_attention_csv(trace, tmp_path / "trace.csv")
    with path.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["segment", "attention_0", "attention_1", "energy_0", "energy_1"]
    assert len(rows) == trace.segments + 1
    assert 'id="attention-1"' in attention_svg(trace, tmp_path / "trace.svg").read_text(encoding="utf-8")


def test_segment_energies_follow_encoder_segments() -> None:
    waveform = np.ones(64)
    energies = segment_energies(waveform, 8, 4, 8)
    frames = (64 - 8) // 4 + 1
    assert energies.shape == (-(-(frames + 4 - 8) // 4) + 1,)
    assert energies[0] == pytest.approx(8 * 8.0)


def test_mean_pooling_has_no_trace(tiny_setup) -> None:
    config, corpus, _, _ = tiny_setup
    model = SeparativeCodingModel(config.model.model_copy(update={"pooling": "mean"}), 2, seed=0)
    with pytest.raises(ConfigurationError):
        attention_trace(model, next(corpus.examples("test")))
