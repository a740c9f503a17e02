"""Joint separation and speaker objective for one mixture."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.config import ContrastiveKind
from csc.exceptions import ShapeError
from csc.models import PitAssignment, PitMode
from csc.network.separator import SeparationOutput, SeparativeCodingModel
from csc.objectives.bank import AlphaParam, GlobalSpeakerBank
from csc.objectives.contrastive import csc_loss, infonce_loss, numerator_distance, reg_loss
from csc.objectives.pit import permutation_count, upit_assign
from csc.objectives.si_snr import si_snr


class SourcedMixture(Protocol):
    mixture: np.ndarray
    sources: Sequence[np.ndarray]
    speaker_ids: Sequence[int]


@dataclass
class JointLoss:
    total: Tensor
    si_snr_loss: Tensor
    contrastive_loss: Tensor
    reg_loss: Tensor
    assignment: PitAssignment
    permutation_evaluations: int
    labelled_embeddings: list[tuple[Tensor, int]]
    output: SeparationOutput

    def values(self) -> dict[str, float]:
        return {
            "si_snr_loss": self.si_snr_loss.item(),
            "csc_loss": self.contrastive_loss.item(),
            "reg_loss": self.reg_loss.item(),
            "total": self.total.item(),
        }


def speech_loss_matrix(estimates: Sequence[Tensor], sources: Sequence[np.ndarray]) -> list[list[Tensor]]:
    """``-SI-SNR(estimate c, source k)`` for every pair."""
    return [[ops.neg(si_snr(estimate, Tensor(source))) for source in sources] for estimate in estimates]


def speaker_criterion(
    embeddings: Sequence[Tensor], speaker_ids: Sequence[int], rows: np.ndarray, alpha: float
) -> np.ndarray:
    """Detached ``alpha ||Z_c - E_(speaker k)||^2`` for every pair.

    The log-sum-exp part of the loss does not depend on the labelling within
    one example, so the numerator alone ranks permutations.
    """
    matrix = np.empty((len(embeddings), len(speaker_ids)))
    for c, z in enumerate(embeddings):
        for k, speaker_id in enumerate(speaker_ids):
            matrix[c, k] = numerator_distance(z.data, rows[speaker_id], alpha)
    return matrix


def joint_loss(
    example: SourcedMixture,
    model: SeparativeCodingModel,
    bank: GlobalSpeakerBank,
    alpha: AlphaParam,
    mode: PitMode,
    *,
    lam: float,
    contrastive: ContrastiveKind = "csc",
) -> JointLoss:
    """``L_SI-SNR(pi) + lam * (L_contrastive(pi) + L_reg)`` with one permutation shared by both terms."""

    sources = [np.asarray(source, dtype=np.float64) for source in example.sources]
    speaker_ids = [int(speaker) for speaker in example.speaker_ids]
    if len(sources) != model.sources or len(speaker_ids) != model.sources:
        raise ShapeError(f"model separates {model.sources} sources, example has {len(sources)}")
    for speaker_id in speaker_ids:
        bank.check_speaker(speaker_id)

    output = model(example.mixture)
    rows = bank.rows_tensor()
    count = model.sources
    if mode is PitMode.SPEECH:
        pairs = speech_loss_matrix(output.estimates, sources)
        values = np.array([[term.item() for term in row] for row in pairs])
        assignment = upit_assign(values, PitMode.SPEECH)
        chosen = [pairs[c][assignment.permutation[c]] for c in range(count)]
        evaluations = permutation_count(count)
    else:
        criterion = speaker_criterion(output.embeddings, speaker_ids, rows.data, alpha.item())
        assignment = upit_assign(criterion, PitMode.SPEAKER)
        chosen = [
            ops.neg(si_snr(output.estimates[c], Tensor(sources[assignment.permutation[c]])))
            for c in range(count)
        ]
        evaluations = 1

    speech = ops.mean(ops.stack(chosen))
    labelled = [(output.embeddings[c], speaker_ids[assignment.permutation[c]]) for c in range(count)]
    if contrastive == "csc":
        contrast = csc_loss(labelled, rows, alpha)
    else:
        contrast = infonce_loss(labelled, rows)
    regulariser = reg_loss(output.embeddings)
    total = ops.add(speech, ops.scale(ops.add(contrast, regulariser), lam))
    return JointLoss(
        total=total,
        si_snr_loss=speech,
        contrastive_loss=contrast,
        reg_loss=regulariser,
        assignment=assignment,
        permutation_evaluations=evaluations,
        labelled_embeddings=labelled,
        output=output,
    )


__all__ = ["JointLoss", "SourcedMixture", "joint_loss", "speaker_criterion", "speech_loss_matrix"]
