from __future__ import annotations

import itertools

import numpy as np
import pytest

from csc.autodiff.gradcheck import gradcheck
from csc.autodiff.tensor import Tape, Tensor, backward
from csc.exceptions import CheckpointError, ConfigurationError, NonFiniteError, ShapeError, TrainingAbortedError
from csc.models import PitMode
from csc.network.separator import SeparativeCodingModel
from csc.objectives.bank import AlphaParam, GlobalSpeakerBank
from csc.objectives.contrastive import csc_loss
from csc.objectives.pit import upit_assign
from csc.simulation.corpus import build_corpus
from csc.training import objective as objective_module
from csc.training import trainer as trainer_module
from csc.training.metrics_sink import JsonlMetricsSink, MetricsSink, read_step_metrics
from csc.training.objective import joint_loss, speaker_criterion
from csc.training.optimizer import Adam
from csc.training.state import build_training_state
from csc.training.trainer import Trainer, epoch_order, mode_for_epoch, train, validation_si_snri
from tests.helpers import InMemoryMetricsSink, fake_mixture, tiny_config

pytestmark = pytest.mark.unit

MODEL = tiny_config().model


@pytest.fixture(scope="module")
def tiny_corpus():
    return build_corpus(tiny_config().corpus)


def _parts(sources: int = 2, speakers: int = 3, seed: int = 0):
    model = SeparativeCodingModel(MODEL, sources, seed=seed)
    bank = GlobalSpeakerBank(speakers, MODEL.feature_dim, seed=seed + 1)
    return model, bank, AlphaParam(1.0)


# Joint objective


def test_zero_lambda_leaves_the_speech_loss() -> None:
    model, bank, alpha = _parts()
    result = joint_loss(fake_mixture(speaker_ids=[2, 0]), model, bank, alpha, PitMode.SPEECH, lam=0.0)
    assert result.total.item() == result.si_snr_loss.item()
    assert result.contrastive_loss.item() >= 0.0


def test_lambda_weights_contrastive_and_regulariser() -> None:
    model, bank, alpha = _parts()
    result = joint_loss(fake_mixture(), model, bank, alpha, PitMode.SPEECH, lam=2.5)
    expected = result.si_snr_loss.item() + 2.5 * (result.contrastive_loss.item() + result.reg_loss.item())
    assert result.total.item() == pytest.approx(expected, rel=1e-12)
    assert set(result.values()) == {"si_snr_loss", "csc_loss", "reg_loss", "total"}


def test_single_source_model_has_a_trivial_assignment() -> None:
    model, bank, alpha = _parts(sources=1)
    result = joint_loss(fake_mixture(count=1, speaker_ids=[1]), model, bank, alpha, PitMode.SPEECH, lam=1.0)
    assert result.assignment.permutation == (0,)
    assert result.permutation_evaluations == 1
    assert np.isfinite(result.total.item())


def test_permutation_evaluations_per_mode() -> None:
    model, bank, alpha = _parts()
    example = fake_mixture()
    speech = joint_loss(example, model, bank, alpha, PitMode.SPEECH, lam=1.0)
    speaker = joint_loss(example, model, bank, alpha, PitMode.SPEAKER, lam=1.0)
    assert speech.permutation_evaluations == 2
    assert speaker.permutation_evaluations == 1
    assert speaker.assignment.mode is PitMode.SPEAKER


def test_one_permutation_labels_both_losses() -> None:
    model, bank, alpha = _parts()
    example = fake_mixture(speaker_ids=[1, 2])
    for mode in PitMode:
        result = joint_loss(example, model, bank, alpha, mode, lam=1.0)
        permutation = result.assignment.permutation
        assert [speaker for _, speaker in result.labelled_embeddings] == [example.speaker_ids[k] for k in permutation]


def test_speaker_criterion_argmin_matches_full_loss_argmin() -> None:
    rng = np.random.default_rng(0)
    for _ in range(200):
        count = int(rng.integers(2, 5))
        rows = rng.normal(size=(6, 3))
        speakers = [int(s) for s in rng.choice(6, size=count, replace=False)]
        embeddings = [Tensor(rng.normal(size=3)) for _ in range(count)]
        alpha = float(rng.uniform(0.2, 2.0))
        full = {
            permutation: csc_loss([(embeddings[c], speakers[permutation[c]]) for c in range(count)], rows, alpha).item()
            for permutation in itertools.permutations(range(count))
        }
        best = min(full, key=lambda permutation: (full[permutation], permutation))
        assert upit_assign(speaker_criterion(embeddings, speakers, rows, alpha)).permutation == best


def test_both_losses_reach_the_shared_encoder() -> None:
    model, bank, alpha = _parts()
    shared = model.g_enc.blocks[0].inter.merge.weight
    for part in ("si_snr_loss", "contrastive_loss"):
        model.zero_grad()
        with Tape() as tape:
            result = joint_loss(fake_mixture(), model, bank, alpha, PitMode.SPEECH, lam=1.0)
        backward(getattr(result, part), tape)
        assert shared.grad is not None, part
        assert float(np.abs(shared.grad).sum()) > 0.0, part


@pytest.mark.parametrize("mode", list(PitMode))
def test_joint_loss_gradients_match_central_differences(mode: PitMode) -> None:
    for seed in range(20):
        model, bank, _ = _parts(seed=seed)
        alpha = AlphaParam(0.5 + 0.1 * seed)
        example = fake_mixture(speaker_ids=[seed % 3, (seed + 1) % 3], seed=seed)
        tensors = [*model.parameters().values(), alpha.raw]
        result = gradcheck(
            lambda: joint_loss(example, model, bank, alpha, mode, lam=1.0).total,
            tensors,
            max_coordinates=2,
            seed=seed,
        )
        assert result.passed(1e-4), f"seed {seed}: {result.max_relative_error}"


def test_joint_loss_guards() -> None:
    model, bank, alpha = _parts()
    with pytest.raises(ShapeError):
        joint_loss(fake_mixture(count=3), model, bank, alpha, PitMode.SPEECH, lam=1.0)
    with pytest.raises(KeyError):
        joint_loss(fake_mixture(speaker_ids=[0, 7]), model, bank, alpha, PitMode.SPEECH, lam=1.0)


# Optimizer


def test_adam_matches_reference_updates() -> None:
    weight = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    optimizer = Adam({"w": weight}, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    grads = [np.array([0.5, -1.0]), np.array([0.2, 0.3])]
    m = np.zeros(2)
    v = np.zeros(2)
    expected = weight.data.copy()
    for t, grad in enumerate(grads, start=1):
        weight.grad = grad.copy()
        optimizer.step()
        m = 0.9 * m + 0.1 * grad
        v = 0.999 * v + 0.001 * grad * grad
        expected -= 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        np.testing.assert_allclose(weight.data, expected, rtol=1e-12)
    assert optimizer.step_count == 2


def test_adam_first_step_moves_by_the_learning_rate() -> None:
    weight = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    optimizer = Adam({"w": weight}, lr=0.01)
    weight.grad = np.array([3.0, -0.001])
    optimizer.step()
    np.testing.assert_allclose(weight.data, [-0.01, 0.01], rtol=1e-4)


def test_adam_skips_missing_and_rejects_non_finite_gradients() -> None:
    idle = Tensor(np.ones(2), requires_grad=True)
    busy = Tensor(np.ones(2), requires_grad=True)
    optimizer = Adam({"idle": idle, "busy": busy})
    busy.grad = np.ones(2)
    optimizer.step()
    np.testing.assert_array_equal(idle.data, np.ones(2))
    np.testing.assert_array_equal(optimizer.first_moment["idle"], 0.0)
    busy.grad = np.array([np.nan, 0.0])
    with pytest.raises(NonFiniteError):
        optimizer.step()


def test_adam_state_round_trip_and_guards() -> None:
    weight = Tensor(np.ones(3), requires_grad=True)
    optimizer = Adam({"w": weight})
    weight.grad = np.array([0.1, 0.2, 0.3])
    optimizer.step()
    restored = Adam({"w": Tensor(np.ones(3), requires_grad=True)})
    restored.load_state_arrays(optimizer.state_arrays(), optimizer.step_count)
    np.testing.assert_array_equal(restored.second_moment["w"], optimizer.second_moment["w"])
    assert restored.step_count == 1
    with pytest.raises(CheckpointError):
        restored.load_state_arrays({}, 1)
    with pytest.raises(ConfigurationError):
        Adam({"w": weight}, lr=0.0)


# Schedule and loop


def test_mode_switches_at_the_configured_epoch() -> None:
    assert [mode_for_epoch(epoch, 3) for epoch in (1, 2, 3, 4)] == [
        PitMode.SPEECH,
        PitMode.SPEECH,
        PitMode.SPEAKER,
        PitMode.SPEAKER,
    ]
    assert mode_for_epoch(1, 1) is PitMode.SPEAKER
    with pytest.raises(ConfigurationError):
        mode_for_epoch(0, 3)


def test_epoch_order_is_a_seeded_permutation(tiny_corpus) -> None:
    records = tiny_corpus.records("train")
    first = epoch_order(records, 0, 1)
    assert sorted(r.example_id for r in first) == sorted(r.example_id for r in records)
    assert first == epoch_order(records, 0, 1)
    assert [r.example_id for r in epoch_order(records, 0, 2)] != [r.example_id for r in first]


def test_training_writes_steps_epochs_and_uses_one_evaluation_after_the_switch(tiny_corpus) -> None:
    config = tiny_config()
    sink = InMemoryMetricsSink()
    assert isinstance(sink, MetricsSink)
    state = train(config, tiny_corpus, sink)
    assert state.epoch == 2
    assert [e.epoch for e in sink.epochs] == [1, 2]
    assert sink.epochs[0].mode is PitMode.SPEECH
    assert sink.epochs[1].mode is PitMode.SPEAKER
    assert sink.epochs[1].validation_si_snri_db is not None
    train_examples = len(tiny_corpus.records("train"))
    assert len(sink.steps) == 2 * -(-train_examples // config.train.batch_size)
    for record in sink.steps:
        batch = min(config.train.batch_size, train_examples - (record.step - 1) * config.train.batch_size)
        per_example = 2 if record.mode is PitMode.SPEECH else 1
        assert record.permutation_evaluations == per_example * batch
        assert np.isfinite(record.total)
    assert set(state.pit_history) == {r.example_id for r in tiny_corpus.records("train")}
    assert sum(record.pi_changed for record in sink.steps if record.epoch == 1) == 0


def test_steps_get_cheaper_after_the_switch(monkeypatch) -> None:
    config = tiny_config(corpus={"sources": 3, "test_speakers": 3}, train={"batch_size": 1})
    corpus = build_corpus(config.corpus)
    evaluated = {"si_snr": 0}
    original = objective_module.si_snr

    def counting_si_snr(*args, **kwargs):
        evaluated["si_snr"] += 1
        return original(*args, **kwargs)

    monkeypatch.setattr(objective_module, "si_snr", counting_si_snr)
    # one millisecond per SI-SNR evaluation
    sink = InMemoryMetricsSink()
    Trainer(build_training_state(config), corpus, sink, clock=lambda: evaluated["si_snr"] / 1000.0).run()

    before, after = sink.epochs
    assert before.mode is PitMode.SPEECH and after.mode is PitMode.SPEAKER
    assert before.steps == after.steps
    assert before.mean_step_ms == pytest.approx(9.0)
    assert after.mean_step_ms == pytest.approx(3.0)
    assert after.mean_step_ms < before.mean_step_ms
    assert all(step.wall_ms > 0.0 for step in sink.steps)


def test_identical_seeds_give_identical_loss_traces(tiny_corpus) -> None:
    config = tiny_config(train={"epochs": 1})
    first, second = InMemoryMetricsSink(), InMemoryMetricsSink()
    train(config, tiny_corpus, first)
    train(config, tiny_corpus, second)
    assert first.loss_trace() == second.loss_trace()


def test_bank_rows_move_during_training(tiny_corpus) -> None:
    config = tiny_config(train={"epochs": 1})
    before = build_training_state(config).bank.rows.copy()
    state = train(config, tiny_corpus, InMemoryMetricsSink())
    assert state.bank.updated.all()
    assert not np.allclose(state.bank.rows, before)


def test_non_finite_loss_aborts_with_a_diagnostic(tiny_corpus, monkeypatch) -> None:
    def exploding(*args, **kwargs):
        raise NonFiniteError("log produced non-finite values")

    monkeypatch.setattr(trainer_module, "joint_loss", exploding)
    sink = InMemoryMetricsSink()
    with pytest.raises(TrainingAbortedError) as info:
        train(tiny_config(), tiny_corpus, sink)
    assert info.value.epoch == 1
    assert info.value.step == 1
    assert len(sink.diagnostics) == 1
    diagnostic = sink.diagnostics[0]
    assert diagnostic.example_id == info.value.example_id
    assert "non-finite" in diagnostic.reason
    assert sink.steps == []


def test_trainer_rejects_a_mismatched_corpus(tiny_corpus) -> None:
    state = build_training_state(tiny_config(corpus={"train_speakers": 4}))
    with pytest.raises(ConfigurationError):
        Trainer(state, tiny_corpus, InMemoryMetricsSink())


def test_validation_gain_is_none_without_examples() -> None:
    assert validation_si_snri(build_training_state(tiny_config()), []) is None


def test_jsonl_sink_appends_and_truncates(tmp_path, tiny_corpus) -> None:
    sink = JsonlMetricsSink(tmp_path)
    train(tiny_config(), tiny_corpus, sink)
    steps = read_step_metrics(tmp_path)
    assert {record.epoch for record in steps} == {1, 2}
    sink.truncate_after(1)
    assert {record.epoch for record in read_step_metrics(tmp_path)} == {1}
    assert (tmp_path / "epochs.jsonl").read_text(encoding="utf-8").count("\n") == 1
    assert read_step_metrics(tmp_path / "missing") == []
