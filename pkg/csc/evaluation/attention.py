from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import ConfigurationError
from csc.models import MixtureExample
from csc.network.separator import SeparativeCodingModel
from csc.objectives.pit import upit_assign
from csc.objectives.si_snr import si_snr_value


@dataclass(frozen=True)
class AttentionTrace:
    """Per-source attention over segments next to the reference energy of the matched source.

    ``curves[c]`` is the column mean of estimate ``c``'s attention map, so it is
    non-negative and sums to one. ``energies[c]`` is the per-segment energy of
    the reference source assigned to estimate ``c``.
    """

    example_id: str
    curves: np.ndarray
    energies: np.ndarray
    assignment: tuple[int, ...]

    @property
    def segments(self) -> int:
        return int(self.curves.shape[1])

    def dominance_agreement(self) -> float:
        """Fraction of segments where the most attended source is also the loudest."""
        return float(np.mean(np.argmax(self.curves, axis=0) == np.argmax(self.energies, axis=0)))


def segment_energies(waveform: np.ndarray, window: int, hop: int, segment_length: int) -> np.ndarray:
    """Energy per segment, laid out like the encoder's segments."""
    frames = ops.frame(Tensor(waveform), window, hop).data
    frame_energy = np.sum(frames * frames, axis=0)
    segmented = ops.segment(Tensor(frame_energy.reshape(1, -1)), segment_length).data
    return segmented.sum(axis=1)[0]


def attention_trace(model: SeparativeCodingModel, example: MixtureExample) -> AttentionTrace:
    output = model(example.mixture)
    if any(attention is None for attention in output.attention):
        raise ConfigurationError("the model pools by mean; there is no attention map to trace")
    curves = np.stack([attention.data.mean(axis=0) for attention in output.attention if attention is not None])
    scores = np.array(
        [[-si_snr_value(estimate.numpy(), source) for source in example.sources] for estimate in output.estimates]
    )
    assignment = upit_assign(scores).permutation
    config = model.config
    energies = np.stack(
        [
            segment_energies(example.sources[assignment[c]], config.window, config.hop, config.segment_length)
            for c in range(len(curves))
        ]
    )
    return AttentionTrace(example_id=example.example_id, curves=curves, energies=energies, assignment=assignment)


def write_attention_csv(trace: AttentionTrace, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    sources = trace.curves.shape[0]
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["segment", *(f"attention_{c}" for c in range(sources)), *(f"energy_{c}" for c in range(sources))]
        )
        for j in range(trace.segments):
            writer.writerow(
                [
                    j,
                    *(repr(float(trace.curves[c, j])) for c in range(sources)),
                    *(repr(float(trace.energies[c, j])) for c in range(sources)),
                ]
            )
    return target


__all__ = ["AttentionTrace", "attention_trace", "segment_energies", "write_attention_csv"]
