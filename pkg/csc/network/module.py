from __future__ import annotations

from typing import Iterator

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor
from csc.exceptions import ShapeError


def parameter(values: np.ndarray) -> Tensor:
    return Tensor(values, requires_grad=True)


class Module:
    """Parameter container; attributes holding tensors or modules are discovered in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            path = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{path}.")
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{path}.{index}.")

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        for name, tensor in self.named_parameters():
            if name not in values:
                continue
            incoming = np.asarray(values[name], dtype=np.float64)
            if incoming.shape != tensor.shape:
                raise ShapeError(f"parameter {name} expects {tensor.shape}, got {incoming.shape}")
            tensor.data[...] = incoming


class Linear(Module):
    """Affine map along the leading (feature) axis of a 1-3 dim tensor."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        *,
        bias: bool = True,
        scale: float = 1.0,
    ) -> None:
        bound = scale / np.sqrt(in_features)
        self.weight = parameter(rng.uniform(-bound, bound, size=(out_features, in_features)))
        self.bias = parameter(np.zeros((out_features, 1))) if bias else None
        self._in = in_features
        self._out = out_features

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[0] != self._in:
            raise ShapeError(f"linear layer expects {self._in} input features, got {x.shape}")
        rest = x.shape[1:]
        flat = ops.reshape(x, (self._in, int(np.prod(rest, dtype=np.int64)))) if x.ndim != 2 else x
        out = ops.matmul(self.weight, flat)
        if self.bias is not None:
            out = ops.add(out, ops.expand(self.bias, out.shape))
        if x.ndim != 2:
            out = ops.reshape(out, (self._out, *rest))
        return out


__all__ = ["Linear", "Module", "parameter"]
