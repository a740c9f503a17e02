from __future__ import annotations

import itertools
import math

import numpy as np

from csc.exceptions import ShapeError, UnsupportedScaleError
from csc.models import PitAssignment, PitMode

MAX_PIT_SOURCES = 4


def upit_assign(loss_matrix: np.ndarray, mode: PitMode = PitMode.SPEECH) -> PitAssignment:
    """Exhaustive utterance-level PIT over a ``C x C`` loss matrix.

    ``loss_matrix[c, k]`` is the loss of estimate ``c`` against source ``k``.
    Permutations are visited in lexicographic order and only a strictly smaller
    mean replaces the incumbent, so ties keep the lexicographically smallest.
    """

    matrix = np.asarray(loss_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ShapeError(f"PIT needs a non-empty square matrix, got shape {matrix.shape}")
    count = matrix.shape[0]
    if count > MAX_PIT_SOURCES:
        raise UnsupportedScaleError(f"exhaustive PIT supports at most {MAX_PIT_SOURCES} sources, got {count}")

    rows = np.arange(count)
    best: tuple[int, ...] = tuple(range(count))
    best_value = np.inf
    for permutation in itertools.permutations(range(count)):
        value = float(matrix[rows, list(permutation)].mean())
        if value < best_value:
            best, best_value = permutation, value
    return PitAssignment(permutation=tuple(best), value=best_value, mode=mode)


def permutation_count(sources: int) -> int:
    return math.factorial(sources)


__all__ = ["MAX_PIT_SOURCES", "permutation_count", "upit_assign"]
