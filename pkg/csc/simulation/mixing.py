from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from csc.exceptions import ConfigurationError, DegenerateSignalError, ShapeError
from csc.models import MixtureExample, Utterance


def signal_power(samples: np.ndarray) -> float:
    return float(np.mean(samples * samples))


def interferer_gain(target_power: float, interferer_power: float, sir_db: float) -> float:
    """Gain ``g`` with ``10*log10(P_target / (g**2 * P_interferer)) == sir_db``."""

    if target_power <= 0.0 or interferer_power <= 0.0:
        raise DegenerateSignalError("cannot set an SIR against a zero-power signal")
    return math.sqrt(target_power / (interferer_power * 10.0 ** (sir_db / 10.0)))


def achieved_sir_db(target: np.ndarray, interferer: np.ndarray) -> float:
    return 10.0 * math.log10(signal_power(target) / signal_power(interferer))


def mix_sources(
    target: Utterance,
    interferers: Sequence[Utterance],
    sir_db: float,
    *,
    example_id: str = "",
) -> MixtureExample:
    """Scale every interferer to ``sir_db`` against the target and sum in source order."""

    if not interferers:
        raise ConfigurationError("at least one interferer is required")
    speakers = [target.speaker_id, *(u.speaker_id for u in interferers)]
    if len(set(speakers)) != len(speakers):
        raise ConfigurationError(f"mixture speakers must be distinct, got {speakers}")
    for other in interferers:
        if other.samples.shape != target.samples.shape:
            raise ShapeError("target and interferer lengths differ")
        if other.sample_rate != target.sample_rate:
            raise ConfigurationError("target and interferer sample rates differ")

    target_power = signal_power(target.samples)
    sources = [target.samples.copy()]
    for other in interferers:
        gain = interferer_gain(target_power, signal_power(other.samples), sir_db)
        sources.append(gain * other.samples)

    # Mixing is the last float operation so mixture - sum(sources) is exactly zero.
    mixture = sources[0]
    for source in sources[1:]:
        mixture = mixture + source

    return MixtureExample(
        example_id=example_id,
        mixture=mixture,
        sources=tuple(sources),
        speaker_ids=tuple(speakers),
        utterance_ids=(target.utterance_id, *(u.utterance_id for u in interferers)),
        sir_db=float(sir_db),
        sample_rate=target.sample_rate,
    )


def mix_at_sir(target: Utterance, interferer: Utterance, sir_db: float, *, example_id: str = "") -> MixtureExample:
    return mix_sources(target, [interferer], sir_db, example_id=example_id)


__all__ = ["achieved_sir_db", "interferer_gain", "mix_at_sir", "mix_sources", "signal_power"]
