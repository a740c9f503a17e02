"""Dense f64 tensors with define-by-run reverse-mode differentiation.

A :class:`Tape` records every differentiable operation executed while it is
active. :func:`backward` replays the tape in reverse, visiting each entry once,
and accumulates ``dLoss/dTensor`` into ``Tensor.grad``.
"""

from __future__ import annotations

from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from csc.exceptions import GradientContractError, NonFiniteError, ShapeError

ArrayLike = Any
BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

MAX_RANK = 3

_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("csc_active_tape", default=None)


class Tensor:
    """Row-major f64 array with optional gradient tracking.

    Scalars are 0-d; everything else has one to three axes.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        name: str | None = None,
        copy: bool = True,
    ) -> None:
        array = np.array(data, dtype=np.float64) if copy else np.asarray(data, dtype=np.float64)
        if array.ndim > MAX_RANK:
            raise ShapeError(f"tensors support at most {MAX_RANK} axes, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            label = f"tensor {name!r}" if name else "tensor"
            raise NonFiniteError(f"{label} contains non-finite values")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a copy of the values."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar; the functional forms live in csc.autodiff.ops.

    def __add__(self, other: "Tensor | float") -> "Tensor":
        from csc.autodiff import ops

        return ops.add(self, other)

    def __radd__(self, other: float) -> "Tensor":
        from csc.autodiff import ops

        return ops.add(other, self)

    def __sub__(self, other: "Tensor | float") -> "Tensor":
        from csc.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other: float) -> "Tensor":
        from csc.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        from csc.autodiff import ops

        return ops.mul(self, other)

    def __rmul__(self, other: float) -> "Tensor":
        from csc.autodiff import ops

        return ops.mul(other, self)

    def __truediv__(self, other: "Tensor | float") -> "Tensor":
        from csc.autodiff import ops

        return ops.div(self, other)

    def __neg__(self) -> "Tensor":
        from csc.autodiff import ops

        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from csc.autodiff import ops

        return ops.matmul(self, other)

    @property
    def T(self) -> "Tensor":
        from csc.autodiff import ops

        return ops.transpose(self)


@dataclass(slots=True)
class TapeEntry:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of the differentiable operations of one forward pass."""

    def __init__(self) -> None:
        self.entries: list[TapeEntry] = []
        self._produced: set[int] = set()
        self._token: Any = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TapeEntry]:
        return iter(self.entries)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        self.entries.append(TapeEntry(op=op, inputs=inputs, output=output, backward=backward))
        self._produced.add(id(output))

    def produced(self, tensor: Tensor) -> bool:
        return id(tensor) in self._produced

    def op_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.entries:
            counts[entry.op] = counts.get(entry.op, 0) + 1
        return counts


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def as_tensor(value: "Tensor | ArrayLike") -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def record_result(op: str, inputs: tuple[Tensor, ...], data: np.ndarray, backward: BackwardFn) -> Tensor:
    """Wrap an op result, reject non-finite values and record it on the active tape."""

    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires_grad, copy=False)
    if requires_grad:
        tape = _ACTIVE_TAPE.get()
        if tape is not None:
            tape.record(op, inputs, out, backward)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` of every tracked tensor reachable from ``loss``.

    Gradients accumulate, so calling backward for several losses before an
    optimizer step sums their contributions.
    """

    if loss.data.size != 1 or loss.ndim > 1:
        raise GradientContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not tape.produced(loss):
        raise GradientContractError("loss was not produced on this tape")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    tensors: dict[int, Tensor] = {id(loss): loss}

    for entry in reversed(tape.entries):
        key = id(entry.output)
        upstream = pending.pop(key, None)
        if upstream is None:
            continue
        _accumulate(entry.output, upstream)
        input_grads = entry.backward(upstream)
        for tensor, grad in zip(entry.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.shape:
                raise ShapeError(f"{entry.op} returned gradient of shape {grad.shape} for input {tensor.shape}")
            input_key = id(tensor)
            tensors[input_key] = tensor
            if input_key in pending:
                pending[input_key] = pending[input_key] + grad
            else:
                pending[input_key] = grad

    # Whatever is left was never produced on the tape: leaves.
    for key, grad in pending.items():
        _accumulate(tensors[key], grad)


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = np.array(grad, dtype=np.float64)
    else:
        tensor.grad = tensor.grad + grad


__all__ = [
    "Tape",
    "TapeEntry",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "record_result",
]
