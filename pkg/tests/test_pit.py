from __future__ import annotations

import numpy as np
import pytest

from csc.exceptions import ShapeError, UnsupportedScaleError
from csc.models import PitMode
from csc.objectives.pit import MAX_PIT_SOURCES, permutation_count, upit_assign

pytestmark = pytest.mark.unit


def _brute_force(matrix: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Recursive enumeration, independent of itertools ordering."""
    size = matrix.shape[0]
    best: list[tuple[float, tuple[int, ...]]] = []

    def extend(prefix: tuple[int, ...]) -> None:
        if len(prefix) == size:
            total = 0.0
            for row, column in enumerate(prefix):
                total += matrix[row, column]
            best.append((total / size, prefix))
            return
        for column in range(size):
            if column not in prefix:
                extend(prefix + (column,))

    extend(())
    value, permutation = min(best)
    return permutation, value


def test_identity_and_swap_hand_cases() -> None:
    identity = upit_assign(np.array([[0.0, 5.0], [5.0, 0.0]]))
    assert identity.permutation == (0, 1)
    assert identity.value == 0.0
    swap = upit_assign(np.array([[5.0, 0.0], [0.0, 5.0]]))
    assert swap.permutation == (1, 0)
    assert swap.value == 0.0


def test_ties_keep_the_lexicographically_smallest() -> None:
    assignment = upit_assign(np.ones((3, 3)))
    assert assignment.permutation == (0, 1, 2)


@pytest.mark.parametrize("size", [2, 3, 4])
def test_matches_brute_force_enumeration(size: int) -> None:
    rng = np.random.default_rng(size)
    for _ in range(1000):
        matrix = rng.normal(size=(size, size))
        permutation, value = _brute_force(matrix)
        assignment = upit_assign(matrix)
        assert assignment.permutation == permutation
        assert assignment.value == pytest.approx(value, abs=1e-12)


@pytest.mark.parametrize("size", [2, 3, 4])
def test_constant_shift_does_not_change_the_assignment(size: int) -> None:
    rng = np.random.default_rng(7 + size)
    for _ in range(1000):
        matrix = rng.normal(size=(size, size))
        assert upit_assign(matrix + 4.2).permutation == upit_assign(matrix).permutation


def test_mode_is_carried() -> None:
    assert upit_assign(np.eye(2), PitMode.SPEAKER).mode is PitMode.SPEAKER


def test_guards() -> None:
    with pytest.raises(UnsupportedScaleError):
        upit_assign(np.zeros((MAX_PIT_SOURCES + 1, MAX_PIT_SOURCES + 1)))
    with pytest.raises(ShapeError):
        upit_assign(np.zeros((2, 3)))
    assert permutation_count(3) == 6
