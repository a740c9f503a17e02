"""Cross-attention pooling of speaker-space features into a separative embedding."""

from __future__ import annotations

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import ShapeError
from csc.network.module import Linear, Module


class CrossAttention(Module):
    """Single-head attention with ``D -> D`` query, key and value maps.

    Queries come from the shared features ``X`` (``D x S_i``); keys and values
    from a speaker map ``Y`` (``D x S_j``). Logits are divided by
    ``temperature`` only; there is no ``1/sqrt(D)`` factor.
    """

    def __init__(self, dim: int, rng: np.random.Generator, *, temperature: float = 1.0) -> None:
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.temperature = temperature
        self._dim = dim

    def _check(self, features: Tensor, label: str) -> None:
        if features.ndim != 2 or features.shape[0] != self._dim:
            raise ShapeError(f"{label} must be {self._dim} x S, got {features.shape}")

    def attention_map(self, x: Tensor, y: Tensor) -> Tensor:
        """Row-stochastic ``S_i x S_j`` map ``softmax_rows(Query(X)^T Key(Y))``."""
        self._check(x, "X")
        self._check(y, "Y")
        logits = ops.matmul(ops.transpose(self.query(x)), self.key(y))
        if self.temperature != 1.0:
            logits = ops.scale(logits, 1.0 / self.temperature)
        return ops.softmax_rows(logits)

    def attend_pool(self, attention: Tensor, y: Tensor) -> Tensor:
        """``Z = (1/S_i) sum_i sum_j a[i, j] Value(Y)[:, j]`` as a ``D`` vector."""
        self._check(y, "Y")
        if attention.ndim != 2 or attention.shape[1] != y.shape[1]:
            raise ShapeError(f"attention {attention.shape} does not match Y {y.shape}")
        weights = ops.reshape(ops.mean(attention, axis=0), (y.shape[1], 1))
        return ops.reshape(ops.matmul(self.value(y), weights), (self._dim,))

    def __call__(self, x: Tensor, y: Tensor) -> tuple[Tensor, Tensor]:
        attention = self.attention_map(x, y)
        return self.attend_pool(attention, y), attention


class MeanPool(Module):
    """Uniform-attention reduction: column mean of ``Value(Y)``."""

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        self.value = Linear(dim, dim, rng)
        self._dim = dim

    def __call__(self, x: Tensor, y: Tensor) -> tuple[Tensor, None]:
        if y.ndim != 2 or y.shape[0] != self._dim:
            raise ShapeError(f"Y must be {self._dim} x S, got {y.shape}")
        return ops.mean(self.value(y), axis=1), None


def attention_map(layer: CrossAttention, x: Tensor, y: Tensor) -> Tensor:
    return layer.attention_map(x, y)


def attend_pool(layer: CrossAttention, attention: Tensor, y: Tensor) -> Tensor:
    return layer.attend_pool(attention, y)


__all__ = ["CrossAttention", "MeanPool", "attend_pool", "attention_map"]
