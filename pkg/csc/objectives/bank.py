"""Global speaker vectors maintained by a gated recurrent aggregator."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import DegenerateSignalError, NonFiniteError, ShapeError, UnknownSpeakerError
from csc.network.module import Linear, Module, parameter

BANK_INIT_SCALE = 0.1
AGGREGATOR_SCALE = 0.5


class GatedAggregator(Module):
    """``E_new = u * E_old + (1 - u) * tanh(W_c [Z; E_old] + b_c)`` with ``u = sigmoid(W_u [Z; E_old] + b_u)``."""

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        self.update = Linear(2 * dim, dim, rng, scale=AGGREGATOR_SCALE)
        self.candidate = Linear(2 * dim, dim, rng, scale=AGGREGATOR_SCALE)
        self._dim = dim

    def __call__(self, z: Tensor, state: Tensor) -> Tensor:
        if z.shape != (self._dim,) or state.shape != (self._dim,):
            raise ShapeError(f"aggregator expects two ({self._dim},) vectors, got {z.shape} and {state.shape}")
        joint = ops.reshape(ops.concat([z, state], axis=0), (2 * self._dim, 1))
        gate = ops.reshape(ops.sigmoid(self.update(joint)), (self._dim,))
        candidate = ops.reshape(ops.tanh(self.candidate(joint)), (self._dim,))
        return ops.add(ops.mul(gate, state), ops.mul(ops.sub(1.0, gate), candidate))

    def enroll(self, embeddings: Iterable[np.ndarray | Tensor]) -> np.ndarray:
        """Run the aggregator from a zero state over ``embeddings`` in order."""
        state = Tensor(np.zeros(self._dim))
        seen = False
        for z in embeddings:
            vector = z.data if isinstance(z, Tensor) else z
            state = self(Tensor(vector), state).detach()
            seen = True
        if not seen:
            raise DegenerateSignalError("enrollment needs at least one embedding")
        return state.numpy()


class AlphaParam(Module):
    """Cluster-size parameter kept positive as ``softplus(raw)``."""

    def __init__(self, initial: float = 1.0) -> None:
        if initial <= 0:
            raise ValueError("alpha must be positive")
        self.raw = parameter(np.array(math.log(math.expm1(initial))))

    def value(self) -> Tensor:
        return ops.softplus(self.raw)

    def item(self) -> float:
        return float(np.logaddexp(0.0, self.raw.data))


class GlobalSpeakerBank(Module):
    """One global vector per training speaker.

    Besides the current rows the bank keeps, per speaker, the embedding and
    previous row of its latest update. :meth:`rows_tensor` recomputes updated
    rows from that pair on the active tape, so losses read the rows with a
    one-step differentiable history into the aggregator.
    """

    def __init__(self, num_speakers: int, dim: int, seed: int) -> None:
        if num_speakers < 1:
            raise ValueError("the bank needs at least one speaker")
        rng = np.random.default_rng(seed)
        self.num_speakers = num_speakers
        self.dim = dim
        self.aggregator = GatedAggregator(dim, rng)
        self.rows = BANK_INIT_SCALE * rng.standard_normal((num_speakers, dim))
        self.last_embedding = np.zeros((num_speakers, dim))
        self.previous_rows = self.rows.copy()
        self.updated = np.zeros(num_speakers, dtype=bool)

    def check_speaker(self, speaker_id: int) -> None:
        if not 0 <= int(speaker_id) < self.num_speakers:
            raise UnknownSpeakerError(f"speaker {speaker_id} has no row in a bank of {self.num_speakers}")

    def row_tensor(self, speaker_id: int) -> Tensor:
        self.check_speaker(speaker_id)
        if not self.updated[speaker_id]:
            return Tensor(self.rows[speaker_id])
        return self.aggregator(Tensor(self.last_embedding[speaker_id]), Tensor(self.previous_rows[speaker_id]))

    def rows_tensor(self) -> Tensor:
        return ops.stack([self.row_tensor(n) for n in range(self.num_speakers)], axis=0)

    def commit(self, z: np.ndarray, speaker_id: int) -> np.ndarray:
        """Fold a finished step's embedding into the speaker's row."""
        self.check_speaker(speaker_id)
        embedding = np.asarray(z, dtype=np.float64)
        if embedding.shape != (self.dim,):
            raise ShapeError(f"embedding must have shape ({self.dim},), got {embedding.shape}")
        previous = self.rows[speaker_id].copy()
        new_row = self.aggregator(Tensor(embedding), Tensor(previous)).numpy()
        self.previous_rows[speaker_id] = previous
        self.last_embedding[speaker_id] = embedding
        self.rows[speaker_id] = new_row
        self.updated[speaker_id] = True
        return new_row

    def check_rows(self) -> None:
        if not np.all(np.isfinite(self.rows)):
            raise NonFiniteError("speaker bank rows contain non-finite values")
        if not np.any(self.rows):
            raise DegenerateSignalError("speaker bank collapsed to all zeros")

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            "rows": self.rows.copy(),
            "last_embedding": self.last_embedding.copy(),
            "previous_rows": self.previous_rows.copy(),
            "updated": self.updated.astype(np.float64),
        }

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.rows = np.array(arrays["rows"], dtype=np.float64)
        self.last_embedding = np.array(arrays["last_embedding"], dtype=np.float64)
        self.previous_rows = np.array(arrays["previous_rows"], dtype=np.float64)
        self.updated = np.asarray(arrays["updated"]) > 0.5
        self.num_speakers, self.dim = self.rows.shape


def update_speaker_bank(bank: GlobalSpeakerBank, z: Tensor, speaker_id: int) -> Tensor:
    """Differentiable update of row ``speaker_id``; the bank stores the new value."""

    bank.check_speaker(speaker_id)
    previous = Tensor(bank.rows[speaker_id])
    new_row = bank.aggregator(z, previous)
    bank.previous_rows[speaker_id] = previous.data
    bank.last_embedding[speaker_id] = z.data
    bank.rows[speaker_id] = new_row.data
    bank.updated[speaker_id] = True
    return new_row


__all__ = ["AlphaParam", "GatedAggregator", "GlobalSpeakerBank", "update_speaker_bank"]
