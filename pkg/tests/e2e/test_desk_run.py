from __future__ import annotations

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from csc.config import load_run_config
from csc.evaluation.attention import attention_trace
from csc.evaluation.trials import evaluate
from csc.models import PitMode
from csc.simulation.corpus import build_corpus
from csc.training.trainer import train
from tests.helpers import InMemoryMetricsSink

pytestmark = pytest.mark.e2e


RUN_E2E = os.getenv("RUN_E2E_TESTS") == "1"

if not RUN_E2E:  # pragma: no cover - guarded for local runs
    pytest.skip("E2E tests require RUN_E2E_TESTS=1", allow_module_level=True)


DESK_CONFIG = Path(__file__).resolve().parents[2] / "configs" / "desk.toml"
TIME_BUDGET_S = 600.0


@pytest.fixture(scope="module")
def desk_run():
    config = load_run_config(DESK_CONFIG, environ={})
    corpus = build_corpus(config.corpus)
    sink = InMemoryMetricsSink()
    started = time.perf_counter()
    state = train(config, corpus, sink)
    elapsed = time.perf_counter() - started
    return config, corpus, state, sink, elapsed


def test_desk_run_fits_the_time_budget(desk_run) -> None:
    *_, elapsed = desk_run
    assert elapsed < TIME_BUDGET_S


def test_steps_after_the_switch_are_faster(desk_run) -> None:
    config, corpus, _, sink, _ = desk_run
    full_steps = len(corpus.records("train")) // config.train.batch_size
    matched = [step for step in sink.steps if step.step <= full_steps]
    before = [step.wall_ms for step in matched if step.mode is PitMode.SPEECH]
    after = [step.wall_ms for step in matched if step.mode is PitMode.SPEAKER]
    assert before and after
    assert all(step.permutation_evaluations == config.train.batch_size for step in matched if step.mode is PitMode.SPEAKER)
    assert float(np.mean(after)) < float(np.mean(before))


def test_separation_beats_the_mixture(desk_run) -> None:
    _, _, _, sink, _ = desk_run
    final = sink.epochs[-1]
    assert final.validation_si_snri_db is not None
    assert final.validation_si_snri_db > 3.0


def test_contrastive_loss_beats_chance(desk_run) -> None:
    config, _, _, sink, _ = desk_run
    assert sink.epochs[-1].mean_csc_loss < math.log(config.corpus.train_speakers)


def test_unseen_speakers_are_verified(desk_run) -> None:
    config, corpus, state, _, _ = desk_run
    _, _, summary = evaluate(corpus, state.model, state.bank.aggregator, config.eval)
    assert summary.eer < 0.15
    assert summary.auc > 0.5


def test_attention_follows_the_louder_source(desk_run) -> None:
    _, corpus, state, _, _ = desk_run
    agreements = [attention_trace(state.model, example).dominance_agreement() for example in corpus.examples("test")]
    assert float(np.mean(agreements)) >= 0.6
