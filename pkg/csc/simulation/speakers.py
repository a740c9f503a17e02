"""Parametric harmonic speakers and utterance rendering."""

from __future__ import annotations

import math

import numpy as np

from csc.exceptions import ConfigurationError
from csc.models import SyntheticSpeaker, Utterance
from csc.simulation.base import SeededSignalSource, derive_seed

PEAK_LEVEL = 0.9
F0_CENTER_RANGE = (90.0, 260.0)
F0_SPREAD = 0.06


def make_speaker(corpus_seed: int, speaker_id: int, harmonics: int = 8) -> SyntheticSpeaker:
    """Speaker parameters as a pure function of ``(corpus_seed, speaker_id)``."""

    if harmonics <= 0:
        raise ConfigurationError("harmonics must be positive")
    rng = np.random.default_rng([corpus_seed, speaker_id])
    center = rng.uniform(*F0_CENTER_RANGE)
    tilt = rng.uniform(0.3, 1.2)
    order = np.arange(1, harmonics + 1, dtype=np.float64)
    gains = rng.gamma(2.0, 1.0, size=harmonics) * order ** (-tilt)
    gains = gains / np.linalg.norm(gains)
    return SyntheticSpeaker(
        speaker_id=speaker_id,
        f0_low=center * (1.0 - F0_SPREAD),
        f0_high=center * (1.0 + F0_SPREAD),
        harmonic_amplitudes=tuple(float(g) for g in gains),
        vibrato_rate=float(rng.uniform(4.0, 7.0)),
        vibrato_depth=float(rng.uniform(0.005, 0.02)),
        syllable_rate=float(rng.uniform(3.0, 6.0)),
        seed=derive_seed(corpus_seed, speaker_id),
    )


class HarmonicVoice(SeededSignalSource):
    """Renders utterances of one speaker; every draw is fixed by the seed."""

    def __init__(self, speaker: SyntheticSpeaker, sample_rate: int, seed: int) -> None:
        if sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        self._speaker = speaker
        self._sample_rate = sample_rate
        super().__init__(seed=[speaker.seed, seed])

    def _initialize_state(self) -> None:
        speaker = self._speaker
        harmonics = len(speaker.harmonic_amplitudes)
        self._f0 = self._rng.uniform(speaker.f0_low, speaker.f0_high)
        self._phases = self._rng.uniform(0.0, 2.0 * math.pi, size=harmonics)
        self._vibrato_phase = self._rng.uniform(0.0, 2.0 * math.pi)
        self._envelope_phase = self._rng.uniform(0.0, 2.0 * math.pi)

    def render(self, duration_s: float, utterance_id: str) -> Utterance:
        if duration_s <= 0:
            raise ConfigurationError("duration_s must be positive")
        speaker = self._speaker
        count = int(round(duration_s * self._sample_rate))
        t = np.arange(count) / self._sample_rate

        vibrato = 1.0 + speaker.vibrato_depth * np.sin(2.0 * math.pi * speaker.vibrato_rate * t + self._vibrato_phase)
        frequency = self._f0 * vibrato
        phase = 2.0 * math.pi * np.cumsum(frequency) / self._sample_rate

        nyquist = 0.5 * self._sample_rate
        signal = np.zeros(count)
        for index, gain in enumerate(speaker.harmonic_amplitudes, start=1):
            if index * self._f0 * (1.0 + speaker.vibrato_depth) >= nyquist:
                break
            signal += gain * np.sin(index * phase + self._phases[index - 1])

        envelope = 0.55 - 0.45 * np.cos(2.0 * math.pi * speaker.syllable_rate * t + self._envelope_phase)
        signal *= envelope
        peak = float(np.max(np.abs(signal)))
        if peak > 0.0:
            signal *= PEAK_LEVEL / peak
        return Utterance(
            utterance_id=utterance_id,
            speaker_id=speaker.speaker_id,
            sample_rate=self._sample_rate,
            samples=signal,
        )


def render_utterance(
    speaker: SyntheticSpeaker,
    duration_s: float,
    seed: int,
    *,
    sample_rate: int = 8000,
    utterance_id: str | None = None,
) -> Utterance:
    """Deterministic utterance of ``speaker`` for ``seed``, peak-normalised to 0.9."""

    if duration_s <= 0:
        raise ConfigurationError("duration_s must be positive")
    voice = HarmonicVoice(speaker, sample_rate=sample_rate, seed=seed)
    return voice.render(duration_s, utterance_id or f"s{speaker.speaker_id}-seed{seed}")


__all__ = ["HarmonicVoice", "PEAK_LEVEL", "make_speaker", "render_utterance"]
