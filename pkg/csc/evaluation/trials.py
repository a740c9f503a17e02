"""Verification trials on unseen test speakers.

Each test speaker's target utterances are split into an enrollment part and a
probe part. The aggregator enrolls a speaker from a zero state over the
enrollment embeddings; every probe is scored against its own speaker and
against an equal number of randomly drawn other speakers.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from common.logging import get_logger
from csc.config import EvalConfig, TrialCondition
from csc.evaluation.metrics import RocCurve, eer_from_curve, roc, score_trial
from csc.exceptions import ConfigurationError, InsufficientEnrollmentError
from csc.models import EvalSummary, ExampleRecord, Trial, TrialSet
from csc.network.separator import SeparativeCodingModel
from csc.objectives.bank import GatedAggregator
from csc.objectives.si_snr import si_snr_value
from csc.simulation.corpus import Corpus

logger = get_logger("csc.eval")

TRIALS_NAME = "trials.csv"
SUMMARY_NAME = "summary.json"
ROC_NAME = "roc.csv"


def target_embedding(
    corpus: Corpus, model: SeparativeCodingModel, record: ExampleRecord, condition: TrialCondition
) -> np.ndarray:
    """Embedding of the record's target speaker.

    ``mix`` embeds the mixture and keeps the output whose estimate best
    matches the target reference; ``clean`` embeds the target utterance alone.
    """
    if condition == "mix":
        example = corpus.example(record)
        waveform, reference = example.mixture, example.sources[0]
    elif condition == "clean":
        waveform = corpus.utterance(record.target_utterance).samples
        reference = waveform
    else:
        raise ConfigurationError(f"unknown trial condition {condition!r}")
    output = model(waveform)
    scores = [si_snr_value(estimate.numpy(), reference) for estimate in output.estimates]
    return output.embeddings[int(np.argmax(scores))].numpy()


def _split_utterances(records: list[ExampleRecord], fraction: float, speaker: int) -> tuple[list[str], list[str]]:
    utterances = sorted({record.target_utterance for record in records})
    cut = math.ceil(fraction * len(utterances))
    enroll, probe = utterances[:cut], utterances[cut:]
    if not enroll or not probe:
        raise InsufficientEnrollmentError(
            f"test speaker {speaker} has {len(utterances)} target utterances; enrollment and probe both need one"
        )
    return enroll, probe


def build_trials(
    corpus: Corpus,
    model: SeparativeCodingModel,
    aggregator: GatedAggregator,
    *,
    condition: TrialCondition = "mix",
    enrollment_fraction: float = 0.5,
    seed: int = 0,
) -> TrialSet:
    by_speaker: dict[int, list[ExampleRecord]] = defaultdict(list)
    for record in corpus.records("test"):
        by_speaker[record.target_speaker].append(record)
    speakers = sorted(by_speaker)
    if len(speakers) < 2:
        raise InsufficientEnrollmentError("non-target trials need at least two test speakers")

    enrollment: dict[int, np.ndarray] = {}
    enrollment_ids: dict[int, list[str]] = {}
    probes: list[tuple[int, str, np.ndarray]] = []
    probe_ids: dict[int, list[str]] = {}
    for speaker in speakers:
        records = by_speaker[speaker]
        enroll_utts, probe_utts = _split_utterances(records, enrollment_fraction, speaker)
        enroll_set = set(enroll_utts)
        enroll_records = [r for r in records if r.target_utterance in enroll_set]
        probe_records = [r for r in records if r.target_utterance not in enroll_set]
        enrollment[speaker] = aggregator.enroll(
            target_embedding(corpus, model, r, condition) for r in enroll_records
        )
        enrollment_ids[speaker] = enroll_utts
        probe_ids[speaker] = probe_utts
        probes.extend((speaker, r.example_id, target_embedding(corpus, model, r, condition)) for r in probe_records)

    rng = np.random.default_rng(seed)
    trials: list[Trial] = []
    for speaker, probe_id, z in probes:
        trials.append(
            Trial(
                trial_id=len(trials),
                label=True,
                score=score_trial(enrollment[speaker], z),
                enrollment_speaker=speaker,
                probe_id=probe_id,
                probe_speaker=speaker,
            )
        )
    for speaker, probe_id, z in probes:
        others = [s for s in speakers if s != speaker]
        impostor = others[int(rng.integers(len(others)))]
        trials.append(
            Trial(
                trial_id=len(trials),
                label=False,
                score=score_trial(enrollment[impostor], z),
                enrollment_speaker=impostor,
                probe_id=probe_id,
                probe_speaker=speaker,
            )
        )
    return TrialSet(trials=trials, enrollment_ids=enrollment_ids, probe_ids=probe_ids)


def summarise(trial_set: TrialSet, condition: TrialCondition) -> tuple[RocCurve, EvalSummary]:
    curve = roc(trial_set.trials)
    summary = EvalSummary(
        eer=eer_from_curve(curve),
        auc=curve.auc,
        n_target=trial_set.n_target,
        n_nontarget=trial_set.n_nontarget,
        condition=condition,
    )
    return curve, summary


def write_trials(trial_set: TrialSet, curve: RocCurve, summary: EvalSummary, directory: str | Path) -> Path:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    with (target / TRIALS_NAME).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["trial_id", "label", "score", "enrollment_speaker", "probe_id", "probe_speaker"])
        for trial in trial_set.trials:
            writer.writerow(
                [
                    trial.trial_id,
                    int(trial.label),
                    repr(trial.score),
                    trial.enrollment_speaker,
                    trial.probe_id,
                    trial.probe_speaker,
                ]
            )
    with (target / ROC_NAME).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, threshold in zip(curve.fpr, curve.tpr, curve.thresholds):
            writer.writerow([repr(float(fpr)), repr(float(tpr)), repr(float(threshold))])
    (target / SUMMARY_NAME).write_text(
        json.dumps(summary.model_dump(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return target


def evaluate(
    corpus: Corpus, model: SeparativeCodingModel, aggregator: GatedAggregator, config: EvalConfig
) -> tuple[TrialSet, RocCurve, EvalSummary]:
    trial_set = build_trials(
        corpus,
        model,
        aggregator,
        condition=config.condition,
        enrollment_fraction=config.enrollment_fraction,
        seed=config.seed,
    )
    curve, summary = summarise(trial_set, config.condition)
    logger.info(
        "verification trials scored",
        extra={
            "event": "csc.eval.scored",
            "context": {
                "condition": config.condition,
                "trials": len(trial_set.trials),
                "eer": summary.eer,
                "auc": summary.auc,
            },
        },
    )
    return trial_set, curve, summary


__all__ = [
    "ROC_NAME",
    "SUMMARY_NAME",
    "TRIALS_NAME",
    "build_trials",
    "evaluate",
    "summarise",
    "target_embedding",
    "write_trials",
]
