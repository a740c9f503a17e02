"""Full separation and embedding graph for one mixture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor, as_tensor
from csc.config import ModelConfig
from csc.exceptions import ConfigurationError
from csc.network.attention import CrossAttention, MeanPool
from csc.network.blocks import BlockStack
from csc.network.encoder import WaveformDecoder, WaveformEncoder, perfect_reconstruction_init
from csc.network.film import FiLM
from csc.network.module import Linear, Module


@dataclass
class SeparationOutput:
    estimates: list[Tensor]
    embeddings: list[Tensor]
    masks: list[Tensor]
    attention: list[Tensor | None]
    features: Tensor
    frames: int


class SeparativeCodingModel(Module):
    """Shared encoder ``g_enc`` feeding a speech head ``g_ss`` and a speaker head ``g_spk``.

    Source ``c`` gets a pre-mask from ``g_ss``; the pre-masked shared features go
    through ``g_spk`` to form the speaker map ``Y_c``, which is pooled by
    cross-attention from the shared ``X`` into ``Z_c``. ``Z_c`` modulates the
    speech features by FiLM before the final sigmoid mask of source ``c``.
    """

    def __init__(self, config: ModelConfig, sources: int, seed: int) -> None:
        if sources < 1:
            raise ConfigurationError("sources must be at least 1")
        rng = np.random.default_rng(seed)
        dim = config.feature_dim
        self.config = config
        self.sources = sources
        self.encoder = WaveformEncoder(dim, config.window, config.hop, rng)
        self.decoder = WaveformDecoder(dim, config.window, config.hop, rng)
        perfect_reconstruction_init(self.encoder, self.decoder, rng)
        self.g_enc = BlockStack(dim, config.blocks_enc, rng)
        self.g_ss = BlockStack(dim, config.blocks_ss, rng)
        self.g_spk = BlockStack(dim, config.blocks_spk, rng)
        self.premask = [Linear(dim, dim, rng) for _ in range(sources)]
        if config.pooling == "attention":
            self.pooling: CrossAttention | MeanPool = CrossAttention(dim, rng, temperature=config.attention_temperature)
        else:
            self.pooling = MeanPool(dim, rng)
        self.film = FiLM(dim, rng)
        self.mask = [Linear(dim, dim, rng) for _ in range(sources)]

    def embed_sources(self, shared: Tensor, speech: Tensor) -> tuple[list[Tensor], list[Tensor | None]]:
        x = ops.mean(shared, axis=1)
        embeddings: list[Tensor] = []
        maps: list[Tensor | None] = []
        for head in self.premask:
            premask = ops.sigmoid(head(speech))
            y = ops.mean(self.g_spk(ops.mul(premask, shared)), axis=1)
            z, attention = self.pooling(x, y)
            embeddings.append(z)
            maps.append(attention)
        return embeddings, maps

    def forward(self, mixture: Tensor | np.ndarray, *, mask_override: float | None = None) -> SeparationOutput:
        waveform = as_tensor(mixture)
        length = waveform.shape[0]
        features = self.encoder(waveform)
        frames = features.shape[1]
        segmented = ops.segment(features, self.config.segment_length)

        shared = self.g_enc(segmented)
        speech = self.g_ss(shared)
        embeddings, maps = self.embed_sources(shared, speech)

        estimates: list[Tensor] = []
        masks: list[Tensor] = []
        for head, z in zip(self.mask, embeddings):
            if mask_override is None:
                mask = ops.sigmoid(head(self.film(speech, z)))
            else:
                mask = Tensor(np.full(segmented.shape, mask_override))
            masks.append(mask)
            masked = ops.overlap_add(ops.mul(mask, segmented), frames)
            estimates.append(self.decoder(masked, length))
        return SeparationOutput(
            estimates=estimates,
            embeddings=embeddings,
            masks=masks,
            attention=maps,
            features=features,
            frames=frames,
        )

    __call__ = forward


def separate(mixture: np.ndarray, model: SeparativeCodingModel) -> list[np.ndarray]:
    """C estimated waveforms, each as long as the input."""
    output = model.forward(mixture)
    return [estimate.numpy() for estimate in output.estimates]


__all__ = ["SeparationOutput", "SeparativeCodingModel", "separate"]
