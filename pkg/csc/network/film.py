from __future__ import annotations

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import ShapeError
from csc.network.module import Linear, Module


class FiLM(Module):
    """Feature-wise linear modulation ``gamma(z) * h + beta(z)`` broadcast over segments.

    ``gamma`` starts as the constant 1 and ``beta`` as the constant 0, so a
    freshly built layer passes ``h`` through unchanged.
    """

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        self.gamma = Linear(dim, dim, rng)
        self.beta = Linear(dim, dim, rng)
        self.gamma.weight.data[...] = 0.0
        self.gamma.bias.data[...] = 1.0
        self.beta.weight.data[...] = 0.0
        self.beta.bias.data[...] = 0.0
        self._dim = dim

    def __call__(self, h: Tensor, z: Tensor) -> Tensor:
        if z.shape != (self._dim,):
            raise ShapeError(f"conditioning vector must have shape ({self._dim},), got {z.shape}")
        if h.shape[0] != self._dim:
            raise ShapeError(f"modulated features must have {self._dim} channels, got {h.shape}")
        column = ops.reshape(z, (self._dim, 1))
        broadcast = (self._dim,) + (1,) * (h.ndim - 1)
        gamma = ops.expand(ops.reshape(self.gamma(column), broadcast), h.shape)
        beta = ops.expand(ops.reshape(self.beta(column), broadcast), h.shape)
        return ops.add(ops.mul(gamma, h), beta)


def film_modulate(film: FiLM, h: Tensor, z: Tensor) -> Tensor:
    return film(h, z)


__all__ = ["FiLM", "film_modulate"]
