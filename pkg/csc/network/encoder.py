"""Waveform front end: framed linear encoder with rectification and its linear decoder."""

from __future__ import annotations

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor, as_tensor
from csc.exceptions import ConfigurationError, ShapeError
from csc.network.module import Module, parameter


def _orthogonal(size: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))


class WaveformEncoder(Module):
    def __init__(self, feature_dim: int, window: int, hop: int, rng: np.random.Generator) -> None:
        if feature_dim <= 0 or window <= 0 or hop <= 0:
            raise ConfigurationError("feature_dim, window and hop must be positive")
        if hop > window:
            raise ConfigurationError("hop must not exceed window")
        self.window = window
        self.hop = hop
        self.feature_dim = feature_dim
        self.weight = parameter(rng.uniform(-1.0, 1.0, size=(feature_dim, window)) / np.sqrt(window))

    def frame_count(self, length: int) -> int:
        return ops.frame_count(length, self.window, self.hop)

    def __call__(self, waveform: Tensor | np.ndarray) -> Tensor:
        x = as_tensor(waveform)
        if x.ndim != 1:
            raise ShapeError(f"encode_waveform needs a 1-D waveform, got {x.shape}")
        if x.shape[0] < self.window:
            raise ShapeError(f"waveform of {x.shape[0]} samples is shorter than the {self.window}-sample window")
        return ops.relu(ops.matmul(self.weight, ops.frame(x, self.window, self.hop)))


class WaveformDecoder(Module):
    def __init__(self, feature_dim: int, window: int, hop: int, rng: np.random.Generator) -> None:
        self.window = window
        self.hop = hop
        self.weight = parameter(rng.uniform(-1.0, 1.0, size=(window, feature_dim)) / np.sqrt(feature_dim))

    def __call__(self, features: Tensor, length: int) -> Tensor:
        return ops.overlap_add_frames(ops.matmul(self.weight, features), self.hop, length)


def perfect_reconstruction_init(encoder: WaveformEncoder, decoder: WaveformDecoder, rng: np.random.Generator) -> bool:
    """Pair encoder rows as ``[A; -A]`` so ``relu(Af) - relu(-Af) = Af`` and invert with the decoder.

    Needs ``feature_dim >= 2 * window``; returns False and leaves the random init otherwise.
    """

    window = encoder.window
    if encoder.feature_dim < 2 * window:
        return False
    basis = _orthogonal(window, rng)
    analysis = encoder.weight.data
    analysis[:window] = basis
    analysis[window : 2 * window] = -basis
    synthesis = np.zeros_like(decoder.weight.data)
    overlap = encoder.hop / encoder.window
    synthesis[:, :window] = basis.T * overlap
    synthesis[:, window : 2 * window] = -basis.T * overlap
    decoder.weight.data[...] = synthesis
    return True


def encode_waveform(encoder: WaveformEncoder, waveform: Tensor | np.ndarray) -> Tensor:
    """``D x F`` rectified features, ``F = (len - window) // hop + 1``."""
    return encoder(waveform)


__all__ = ["WaveformDecoder", "WaveformEncoder", "encode_waveform", "perfect_reconstruction_init"]
