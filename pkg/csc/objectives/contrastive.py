"""Contrastive separative coding loss, its InfoNCE relative and the norm regulariser.

Every loss takes a batch of ``(Z, speaker_id)`` pairs and the ``N x D`` matrix
of global speaker vectors; the denominator always runs over all ``N``
speakers.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import logsumexp as np_logsumexp

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor, as_tensor
from csc.exceptions import EmptyBatchError, ShapeError, UnknownSpeakerError
from csc.objectives.bank import AlphaParam, GlobalSpeakerBank

EmbeddingBatch = Sequence[tuple[Tensor, int]]
BankLike = GlobalSpeakerBank | Tensor | np.ndarray
AlphaLike = AlphaParam | Tensor | float


def _rows(bank: BankLike) -> Tensor:
    if isinstance(bank, GlobalSpeakerBank):
        return bank.rows_tensor()
    rows = as_tensor(bank)
    if rows.ndim != 2:
        raise ShapeError(f"speaker rows must be N x D, got {rows.shape}")
    return rows


def _alpha(alpha: AlphaLike) -> Tensor:
    if isinstance(alpha, AlphaParam):
        return alpha.value()
    value = as_tensor(alpha)
    if value.ndim != 0 or value.item() <= 0.0:
        raise ValueError("alpha must be a positive scalar")
    return value


def _validate_batch(batch: EmbeddingBatch, rows: Tensor) -> None:
    if not batch:
        raise EmptyBatchError("contrastive losses need at least one embedding")
    count, dim = rows.shape
    for z, speaker_id in batch:
        if z.shape != (dim,):
            raise ShapeError(f"embedding must have shape ({dim},), got {z.shape}")
        if not 0 <= int(speaker_id) < count:
            raise UnknownSpeakerError(f"speaker {speaker_id} has no row among {count} speakers")


def squared_distances(z: Tensor, rows: Tensor) -> Tensor:
    """``||Z - E^(n)||^2`` for every row ``n`` as an ``N`` vector."""
    count, dim = rows.shape
    tiled = ops.expand(ops.reshape(z, (1, dim)), (count, dim))
    return ops.sum(ops.square(ops.sub(tiled, rows)), axis=1)


def density_score(z: Tensor, e: Tensor, alpha: AlphaLike) -> Tensor:
    """``exp(-alpha * ||z - e||^2)``, in ``(0, 1]``."""
    if z.shape != e.shape:
        raise ShapeError(f"density_score shapes differ: {z.shape} vs {e.shape}")
    return ops.exp(ops.neg(ops.mul(_alpha(alpha), ops.sq_l2(z, e))))


def csc_loss(batch: EmbeddingBatch, bank: BankLike, alpha: AlphaLike) -> Tensor:
    """Mean of ``alpha * d_c + logsumexp_n(-alpha * d_n)`` over the batch."""

    rows = _rows(bank)
    _validate_batch(batch, rows)
    a = _alpha(alpha)
    terms = []
    for z, speaker_id in batch:
        scaled = ops.mul(a, squared_distances(z, rows))
        target = ops.take(scaled, int(speaker_id))
        terms.append(ops.add(target, ops.logsumexp(ops.neg(scaled))))
    return ops.mean(ops.stack(terms))


def infonce_loss(batch: EmbeddingBatch, bank: BankLike) -> Tensor:
    """Same contrastive form with the score ``exp(Z^T E)``."""

    rows = _rows(bank)
    _validate_batch(batch, rows)
    terms = []
    for z, speaker_id in batch:
        logits = ops.reshape(ops.matmul(rows, ops.reshape(z, (rows.shape[1], 1))), (rows.shape[0],))
        terms.append(ops.sub(ops.logsumexp(logits), ops.take(logits, int(speaker_id))))
    return ops.mean(ops.stack(terms))


def reg_loss(embeddings: Sequence[Tensor]) -> Tensor:
    """Mean of ``(||Z|| - 1)^2``; keeps embeddings away from the all-zero solution."""
    if not embeddings:
        raise EmptyBatchError("reg_loss needs at least one embedding")
    return ops.mean(ops.stack([ops.square(ops.sub(ops.norm(z), 1.0)) for z in embeddings]))


def numerator_distance(z: np.ndarray, e: np.ndarray, alpha: float) -> float:
    diff = np.asarray(z) - np.asarray(e)
    return float(alpha * np.dot(diff, diff))


# Reference evaluations used by the identity checks.


def _numpy_batch(batch: Sequence[tuple[np.ndarray, int]], rows: np.ndarray) -> None:
    if len(batch) == 0:
        raise EmptyBatchError("contrastive losses need at least one embedding")
    for z, speaker_id in batch:
        if np.shape(z) != (rows.shape[1],):
            raise ShapeError(f"embedding must have shape ({rows.shape[1]},), got {np.shape(z)}")
        if not 0 <= int(speaker_id) < rows.shape[0]:
            raise UnknownSpeakerError(f"speaker {speaker_id} has no row among {rows.shape[0]} speakers")


def csc_loss_decomposed(batch: Sequence[tuple[np.ndarray, int]], rows: np.ndarray, alpha: float) -> float:
    rows = np.asarray(rows, dtype=np.float64)
    _numpy_batch(batch, rows)
    values = []
    for z, n in batch:
        scaled = alpha * np.sum((rows - z) ** 2, axis=1)
        values.append(scaled[n] + np_logsumexp(-scaled))
    return float(np.mean(values))


def csc_loss_direct(batch: Sequence[tuple[np.ndarray, int]], rows: np.ndarray, alpha: float) -> float:
    """``-log(f(Z, E_c) / sum_n f(Z, E_n))`` as a ratio of scores shifted by the nearest row."""
    rows = np.asarray(rows, dtype=np.float64)
    _numpy_batch(batch, rows)
    values = []
    for z, n in batch:
        scaled = alpha * np.sum((rows - z) ** 2, axis=1)
        shifted = scaled - scaled.min()
        scores = np.exp(-shifted)
        ratio = scores[n] / scores.sum()
        # an underflowed numerator falls back to the log of the same ratio
        values.append(-math.log(ratio) if ratio > 0.0 else shifted[n] + math.log(scores.sum()))
    return float(np.mean(values))


def norm_cancellation(
    batch: Sequence[tuple[np.ndarray, int]], rows: np.ndarray, alpha: float
) -> tuple[float, float]:
    """Loss with ``f`` and with ``f_hat = exp(-alpha ||Z - E||^2 + alpha ||Z||^2)``."""

    rows = np.asarray(rows, dtype=np.float64)
    _numpy_batch(batch, rows)
    with_f = csc_loss_decomposed(batch, rows, alpha)
    values = []
    for z, n in batch:
        log_scores = -alpha * np.sum((rows - z) ** 2, axis=1) + alpha * float(np.dot(z, z))
        values.append(-log_scores[n] + np_logsumexp(log_scores))
    return with_f, float(np.mean(values))


def decomposition_paths(
    batch: Sequence[tuple[np.ndarray, int]], rows: np.ndarray, alpha: float
) -> tuple[float, float]:
    """(log-space decomposition, direct ratio) of the same loss."""
    return csc_loss_decomposed(batch, rows, alpha), csc_loss_direct(batch, rows, alpha)


def rescaling_identity(z: np.ndarray, e: np.ndarray, alpha: float) -> tuple[float, float]:
    """``f(Z, E)`` and ``exp(Z^T E)^(2 alpha) / exp(alpha ||Z||^2 + alpha ||E||^2)``."""
    z = np.asarray(z, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    lhs = math.exp(-alpha * float(np.sum((z - e) ** 2)))
    log_rhs = 2.0 * alpha * float(np.dot(z, e)) - alpha * (float(np.dot(z, z)) + float(np.dot(e, e)))
    rhs = math.exp(log_rhs)
    return lhs, rhs


__all__ = [
    "csc_loss",
    "csc_loss_decomposed",
    "csc_loss_direct",
    "decomposition_paths",
    "density_score",
    "infonce_loss",
    "norm_cancellation",
    "numerator_distance",
    "reg_loss",
    "rescaling_identity",
    "squared_distances",
]
