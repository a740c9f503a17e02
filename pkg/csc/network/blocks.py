"""Residual dual-path sequence blocks over ``D x K x S`` segmented features."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import ShapeError
from csc.network.module import Linear, Module, parameter

LAYER_NORM_EPS = 1e-5
INTRA_AXIS = 1
INTER_AXIS = 2


class LayerNorm(Module):
    """Normalises every ``(k, s)`` column over the feature axis."""

    def __init__(self, dim: int) -> None:
        self.gain = parameter(np.ones((dim, 1)))
        self.shift = parameter(np.zeros((dim, 1)))
        self._dim = dim

    def __call__(self, x: Tensor) -> Tensor:
        shape = x.shape
        flat = ops.reshape(x, (self._dim, x.size // self._dim))
        columns = flat.shape
        centred = ops.sub(flat, ops.expand(ops.mean(flat, axis=0, keepdims=True), columns))
        variance = ops.mean(ops.square(centred), axis=0, keepdims=True)
        scale = ops.sqrt(ops.add(variance, LAYER_NORM_EPS))
        normalised = ops.div(centred, ops.expand(scale, columns))
        out = ops.add(
            ops.mul(normalised, ops.expand(self.gain, columns)),
            ops.expand(self.shift, columns),
        )
        return ops.reshape(out, shape)


class GatedScan(Module):
    """Bidirectional quasi-recurrent pass along one axis.

    Gates ``u`` and candidates ``c`` come from the input; the state follows
    ``h_t = u_t * h_{t-1} + (1 - u_t) * c_t`` in each direction, and both
    directions are merged by a linear projection.
    """

    def __init__(self, dim: int, axis: int, rng: np.random.Generator, *, merge_scale: float = 1.0) -> None:
        self.forward_gates = Linear(dim, 2 * dim, rng)
        self.backward_gates = Linear(dim, 2 * dim, rng)
        self.merge = Linear(2 * dim, dim, rng, scale=merge_scale)
        self._dim = dim
        self._axis = axis

    def _direction(self, x: Tensor, gates: Linear, reverse: bool) -> Tensor:
        dim = self._dim
        projected = gates(x)
        update = ops.sigmoid(ops.take(projected, list(range(dim)), axis=0))
        candidate = ops.tanh(ops.take(projected, list(range(dim, 2 * dim)), axis=0))
        drive = ops.mul(ops.sub(1.0, update), candidate)
        return ops.linear_scan(update, drive, axis=self._axis, reverse=reverse)

    def __call__(self, x: Tensor) -> Tensor:
        forward = self._direction(x, self.forward_gates, reverse=False)
        backward = self._direction(x, self.backward_gates, reverse=True)
        return self.merge(ops.concat([forward, backward], axis=0))


class SequenceBlock(Module):
    """Layer norm, intra-segment pass, inter-segment pass, output projection, residual."""

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        self.norm = LayerNorm(dim)
        self.intra = GatedScan(dim, INTRA_AXIS, rng)
        self.inter = GatedScan(dim, INTER_AXIS, rng)
        # Zero output projection: the block starts as the identity.
        self.inter.merge.weight.data[...] = 0.0
        self._dim = dim

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[0] != self._dim:
            raise ShapeError(f"sequence block expects {self._dim} x K x S input, got {x.shape}")
        y = self.norm(x)
        y = self.intra(y)
        y = self.inter(y)
        return ops.add(x, y)


class BlockStack(Module):
    def __init__(self, dim: int, count: int, rng: np.random.Generator) -> None:
        self.blocks = [SequenceBlock(dim, rng) for _ in range(count)]

    def __call__(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x


def sequence_block_forward(x: Tensor, blocks: SequenceBlock | Sequence[SequenceBlock]) -> Tensor:
    if isinstance(blocks, SequenceBlock):
        return blocks(x)
    for block in blocks:
        x = block(x)
    return x


__all__ = ["BlockStack", "GatedScan", "LayerNorm", "SequenceBlock", "sequence_block_forward"]
