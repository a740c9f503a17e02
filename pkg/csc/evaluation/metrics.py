"""Verification scoring and threshold-free metrics over a list of trials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from csc.exceptions import ShapeError, SingleClassTrialsError
from csc.models import Trial


def score_trial(enrollment: np.ndarray, probe: np.ndarray) -> float:
    """Negative squared distance; a monotone image of the density score."""
    e = np.asarray(enrollment, dtype=np.float64)
    z = np.asarray(probe, dtype=np.float64)
    if e.shape != z.shape or e.ndim != 1:
        raise ShapeError(f"trial vectors must be equal-length 1-D arrays, got {e.shape} and {z.shape}")
    diff = z - e
    return -float(np.dot(diff, diff))


@dataclass(frozen=True)
class RocCurve:
    """Operating points from the strictest threshold (0, 0) to the loosest (1, 1)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    n_target: int
    n_nontarget: int

    @property
    def fnr(self) -> np.ndarray:
        return 1.0 - self.tpr


def _split(trials: Sequence[Trial]) -> tuple[np.ndarray, np.ndarray]:
    scores = np.array([trial.score for trial in trials], dtype=np.float64)
    labels = np.array([trial.label for trial in trials], dtype=bool)
    if labels.all() or not labels.any():
        raise SingleClassTrialsError("ROC metrics need both target and non-target trials")
    return scores, labels


def roc(trials: Sequence[Trial]) -> RocCurve:
    """Sweep every distinct score; equal scores enter together so ties get half credit."""

    scores, labels = _split(trials)
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    # last index of each group of equal scores
    boundaries = np.flatnonzero(np.diff(scores)) if scores.size > 1 else np.array([], dtype=np.int64)
    ends = np.append(boundaries, scores.size - 1)
    true_pos = np.cumsum(labels)[ends]
    false_pos = np.cumsum(~labels)[ends]
    positives = int(labels.sum())
    negatives = int((~labels).sum())
    fpr = np.concatenate([[0.0], false_pos / negatives])
    tpr = np.concatenate([[0.0], true_pos / positives])
    thresholds = np.concatenate([[np.inf], scores[ends]])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc, n_target=positives, n_nontarget=negatives)


def eer_from_curve(curve: RocCurve) -> float:
    """Rate where FNR meets FPR, interpolating linearly across the crossing segment."""
    gap = curve.fnr - curve.fpr
    crossing = int(np.flatnonzero(gap <= 0.0)[0])
    if gap[crossing] == 0.0 or crossing == 0:
        return float(curve.fpr[crossing])
    before, after = gap[crossing - 1], gap[crossing]
    weight = before / (before - after)
    return float(curve.fpr[crossing - 1] + weight * (curve.fpr[crossing] - curve.fpr[crossing - 1]))


def eer(trials: Sequence[Trial]) -> float:
    return eer_from_curve(roc(trials))


def pair_counting_auc(trials: Sequence[Trial]) -> float:
    """``P(target > non-target) + P(tie) / 2`` over every pair."""
    scores, labels = _split(trials)
    targets = scores[labels][:, None]
    nontargets = scores[~labels][None, :]
    wins = np.sum(targets > nontargets) + 0.5 * np.sum(targets == nontargets)
    return float(wins / (targets.size * nontargets.size))


__all__ = ["RocCurve", "eer", "eer_from_curve", "pair_counting_auc", "roc", "score_trial"]
