from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

Seed = int | Sequence[int]


class SeededSignalSource(ABC):
    """Common functionality for seeded signal generators."""

    def __init__(self, seed: Seed) -> None:
        self._seed = seed
        self._rng = np.random.default_rng(seed)
        self._initialize_state()

    @abstractmethod
    def _initialize_state(self) -> None:
        """Draw the per-instance random state from ``self._rng``."""

    def reset(self) -> None:
        """Reset the generator to its initial seeded state."""
        self._rng = np.random.default_rng(self._seed)
        self._initialize_state()


def derive_seed(*entropy: int) -> int:
    """Stable 63-bit seed derived from a tuple of integers."""
    state = np.random.SeedSequence(list(entropy)).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))
