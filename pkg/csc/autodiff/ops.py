"""Differentiable primitives.

Every op computes its forward result with numpy and returns a closure that
maps the upstream gradient to one gradient per input. Broadcasting is limited
to 0-d scalars; anything else goes through :func:`expand` explicitly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from csc.autodiff.tensor import ArrayLike, Tensor, as_tensor, record_result
from csc.exceptions import ConfigurationError, ShapeError


def _pair(a: Tensor | ArrayLike, b: Tensor | ArrayLike, op: str) -> tuple[Tensor, Tensor]:
    left, right = as_tensor(a), as_tensor(b)
    if left.shape != right.shape and left.ndim != 0 and right.ndim != 0:
        raise ShapeError(f"{op}: shapes {left.shape} and {right.shape} differ; only scalars broadcast")
    return left, right


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum()).reshape(shape)


# Elementwise arithmetic


def add(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    left, right = _pair(a, b, "add")

    def _backward(g: np.ndarray):
        return _reduce_to(g, left.shape), _reduce_to(g, right.shape)

    return record_result("add", (left, right), left.data + right.data, _backward)


def sub(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    left, right = _pair(a, b, "sub")

    def _backward(g: np.ndarray):
        return _reduce_to(g, left.shape), _reduce_to(-g, right.shape)

    return record_result("sub", (left, right), left.data - right.data, _backward)


def mul(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    left, right = _pair(a, b, "mul")

    def _backward(g: np.ndarray):
        return _reduce_to(g * right.data, left.shape), _reduce_to(g * left.data, right.shape)

    return record_result("mul", (left, right), left.data * right.data, _backward)


def div(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    left, right = _pair(a, b, "div")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = left.data / right.data

    def _backward(g: np.ndarray):
        return (
            _reduce_to(g / right.data, left.shape),
            _reduce_to(-g * left.data / (right.data * right.data), right.shape),
        )

    return record_result("div", (left, right), out, _backward)


def scale(t: Tensor, factor: float) -> Tensor:
    """Multiply by a constant scalar."""
    return mul(t, float(factor))


def neg(t: Tensor) -> Tensor:
    return record_result("neg", (t,), -t.data, lambda g: (-g,))


# Elementwise functions


def exp(t: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(t.data)
    return record_result("exp", (t,), out, lambda g: (g * out,))


def log(t: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(t.data)
    return record_result("log", (t,), out, lambda g: (g / t.data,))


def sqrt(t: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(t.data)

    def _backward(g: np.ndarray):
        safe = np.where(out > 0.0, out, 1.0)
        return (np.where(out > 0.0, 0.5 * g / safe, 0.0),)

    return record_result("sqrt", (t,), out, _backward)


def square(t: Tensor) -> Tensor:
    return record_result("square", (t,), t.data * t.data, lambda g: (2.0 * t.data * g,))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(t: Tensor) -> Tensor:
    out = _stable_sigmoid(t.data)
    return record_result("sigmoid", (t,), out, lambda g: (g * out * (1.0 - out),))


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)
    return record_result("tanh", (t,), out, lambda g: (g * (1.0 - out * out),))


def relu(t: Tensor) -> Tensor:
    mask = t.data > 0.0
    return record_result("relu", (t,), np.where(mask, t.data, 0.0), lambda g: (g * mask,))


def softplus(t: Tensor) -> Tensor:
    out = np.logaddexp(0.0, t.data)
    return record_result("softplus", (t,), out, lambda g: (g * _stable_sigmoid(t.data),))


# Reductions and shape plumbing


def _normalise_axis(axis: int | None, ndim: int) -> int | None:
    if axis is None:
        return None
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for {ndim} dims")
    return axis % ndim


def sum(t: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    ax = _normalise_axis(axis, t.ndim)
    out = np.sum(t.data, axis=ax, keepdims=keepdims)

    def _backward(g: np.ndarray):
        if ax is not None and not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, t.shape).copy(),)

    return record_result("sum", (t,), np.asarray(out), _backward)


def mean(t: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    ax = _normalise_axis(axis, t.ndim)
    count = t.size if ax is None else t.shape[ax]
    out = np.mean(t.data, axis=ax, keepdims=keepdims)

    def _backward(g: np.ndarray):
        if ax is not None and not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g / count, t.shape).copy(),)

    return record_result("mean", (t,), np.asarray(out), _backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")

    def _backward(g: np.ndarray):
        return g @ b.data.T, a.data.T @ g

    return record_result("matmul", (a, b), a.data @ b.data, _backward)


def transpose(t: Tensor) -> Tensor:
    if t.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {t.shape}")
    return record_result("transpose", (t,), t.data.T.copy(), lambda g: (g.T,))


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    target = tuple(int(s) for s in shape)
    if int(np.prod(target, dtype=np.int64)) != t.size:
        raise ShapeError(f"cannot reshape {t.shape} into {target}")
    return record_result("reshape", (t,), t.data.reshape(target), lambda g: (g.reshape(t.shape),))


def expand(t: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicitly broadcast size-1 axes to ``shape``."""
    target = tuple(int(s) for s in shape)
    if len(target) != t.ndim:
        raise ShapeError(f"expand keeps the rank: {t.shape} -> {target}")
    expanded_axes = []
    for axis, (have, want) in enumerate(zip(t.shape, target)):
        if have == want:
            continue
        if have != 1:
            raise ShapeError(f"expand can only grow size-1 axes: {t.shape} -> {target}")
        expanded_axes.append(axis)

    def _backward(g: np.ndarray):
        if expanded_axes:
            g = g.sum(axis=tuple(expanded_axes), keepdims=True)
        return (g,)

    return record_result("expand", (t,), np.broadcast_to(t.data, target).copy(), _backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    ax = _normalise_axis(axis, tensors[0].ndim)
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def _backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=ax))

    return record_result("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=ax), _backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("stack needs at least one tensor")
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack needs equal shapes, got {sorted(shapes)}")

    def _backward(g: np.ndarray):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return record_result("stack", tuple(tensors), np.stack([t.data for t in tensors], axis=axis), _backward)


def take(t: Tensor, index: int | Sequence[int], axis: int = 0) -> Tensor:
    """Select entries along one axis; an int index drops the axis."""
    ax = _normalise_axis(axis, t.ndim)
    idx = np.asarray(index, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= t.shape[ax]):
        raise ShapeError(f"index {index} out of range for axis {ax} of {t.shape}")
    out = np.take(t.data, idx, axis=ax)

    def _backward(g: np.ndarray):
        grad = np.zeros_like(t.data)
        moved = np.moveaxis(grad, ax, 0)
        np.add.at(moved, idx, np.moveaxis(g, ax, 0) if idx.ndim else g)
        return (grad,)

    return record_result("take", (t,), np.asarray(out), _backward)


# Composite numerics with fused gradients


def softmax_rows(t: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, stabilised by subtracting each row's max."""
    if t.ndim != 2:
        raise ShapeError(f"softmax_rows needs a 2-D tensor, got {t.shape}")
    shifted = t.data - t.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def _backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return record_result("softmax_rows", (t,), out, _backward)


def logsumexp(v: Tensor) -> Tensor:
    if v.ndim != 1:
        raise ShapeError(f"logsumexp needs a 1-D tensor, got {v.shape}")
    peak = v.data.max()
    weights = np.exp(v.data - peak)
    total = weights.sum()
    out = np.asarray(peak + np.log(total))

    def _backward(g: np.ndarray):
        return (g * weights / total,)

    return record_result("logsumexp", (v,), out, _backward)


def sq_l2(a: Tensor, b: Tensor | ArrayLike) -> Tensor:
    """Squared Euclidean distance between two tensors of one shape."""
    right = as_tensor(b)
    if a.shape != right.shape:
        raise ShapeError(f"sq_l2 shapes differ: {a.shape} vs {right.shape}")
    diff = a.data - right.data

    def _backward(g: np.ndarray):
        return 2.0 * g * diff, -2.0 * g * diff

    return record_result("sq_l2", (a, right), np.asarray(np.sum(diff * diff)), _backward)


def norm(t: Tensor) -> Tensor:
    """Euclidean norm over all entries; the gradient at the origin is taken as zero."""
    value = float(np.sqrt(np.sum(t.data * t.data)))

    def _backward(g: np.ndarray):
        if value == 0.0:
            return (np.zeros_like(t.data),)
        return (g * t.data / value,)

    return record_result("norm", (t,), np.asarray(value), _backward)


def linear_scan(gates: Tensor, inputs: Tensor, *, axis: int, reverse: bool = False) -> Tensor:
    """Gated linear recurrence ``h_t = gates_t * h_{t-1} + inputs_t`` along ``axis``.

    The state starts at zero; ``reverse`` runs the recurrence from the last
    index to the first.
    """
    if gates.shape != inputs.shape:
        raise ShapeError(f"linear_scan shapes differ: {gates.shape} vs {inputs.shape}")
    ax = _normalise_axis(axis, gates.ndim)
    a = np.moveaxis(gates.data, ax, 0)
    b = np.moveaxis(inputs.data, ax, 0)
    steps = a.shape[0]
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    states = np.empty_like(b)
    state = np.zeros_like(b[0])
    for t in order:
        state = a[t] * state + b[t]
        states[t] = state
    out = np.ascontiguousarray(np.moveaxis(states, 0, ax))

    def _backward(g: np.ndarray):
        upstream = np.moveaxis(g, ax, 0)
        grad_a = np.zeros_like(a)
        grad_b = np.zeros_like(b)
        carry = np.zeros_like(b[0])
        for t in reversed(order):
            total = upstream[t] + carry
            grad_b[t] = total
            previous_index = t + 1 if reverse else t - 1
            if 0 <= previous_index < steps:
                grad_a[t] = total * states[previous_index]
            carry = total * a[t]
        return np.moveaxis(grad_a, 0, ax), np.moveaxis(grad_b, 0, ax)

    return record_result("linear_scan", (gates, inputs), out, _backward)


# Waveform framing and dual-path segmentation


def _frame_index(frames: int, window: int, hop: int) -> np.ndarray:
    return np.arange(window)[:, None] + hop * np.arange(frames)[None, :]


def frame_count(length: int, window: int, hop: int) -> int:
    return (length - window) // hop + 1


def frame(x: Tensor, window: int, hop: int) -> Tensor:
    """Cut a 1-D waveform into ``window x F`` frames with the given hop."""
    if x.ndim != 1:
        raise ShapeError(f"frame needs a 1-D waveform, got {x.shape}")
    if window <= 0 or hop <= 0 or hop > window:
        raise ConfigurationError(f"invalid framing window={window} hop={hop}")
    if x.shape[0] < window:
        raise ShapeError(f"waveform of {x.shape[0]} samples is shorter than the {window}-sample window")
    index = _frame_index(frame_count(x.shape[0], window, hop), window, hop)

    def _backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return record_result("frame", (x,), x.data[index], _backward)


def overlap_add_frames(frames: Tensor, hop: int, length: int) -> Tensor:
    """Sum ``window x F`` frames back into a waveform of ``length`` samples."""
    if frames.ndim != 2:
        raise ShapeError(f"overlap_add_frames needs 2-D frames, got {frames.shape}")
    window, count = frames.shape
    index = _frame_index(count, window, hop)
    span = max(length, (count - 1) * hop + window)
    buffer = np.zeros(span)
    np.add.at(buffer, index, frames.data)

    def _backward(g: np.ndarray):
        padded = np.zeros(span)
        padded[:length] = g
        return (padded[index],)

    return record_result("overlap_add_frames", (frames,), buffer[:length].copy(), _backward)


def segment_count(frames: int, segment_length: int) -> int:
    hop = segment_length // 2
    return -(-(frames + hop - segment_length) // hop) + 1


def _segment_index(segments: int, segment_length: int) -> np.ndarray:
    hop = segment_length // 2
    return np.arange(segment_length)[:, None] + hop * np.arange(segments)[None, :]


def _check_segment_length(segment_length: int) -> None:
    if segment_length <= 0 or segment_length % 2:
        raise ConfigurationError(f"segment length K must be positive and even, got {segment_length}")


def segment(f: Tensor, segment_length: int) -> Tensor:
    """Chunk ``D x F`` features into ``D x K x S`` with 50% overlap and zero padding at the end."""
    _check_segment_length(segment_length)
    if f.ndim != 2:
        raise ShapeError(f"segment needs D x F features, got {f.shape}")
    dim, frames = f.shape
    segments = segment_count(frames, segment_length)
    index = _segment_index(segments, segment_length)
    span = (segments - 1) * (segment_length // 2) + segment_length
    padded = np.zeros((dim, span))
    padded[:, :frames] = f.data

    def _backward(g: np.ndarray):
        grad = np.zeros((dim, span))
        np.add.at(grad, (slice(None), index), g)
        return (grad[:, :frames],)

    return record_result("segment", (f,), padded[:, index], _backward)


def overlap_add(segments: Tensor, frames: int) -> Tensor:
    """Inverse of :func:`segment`: sum overlapping chunks and divide by their overlap count."""
    if segments.ndim != 3:
        raise ShapeError(f"overlap_add needs D x K x S segments, got {segments.shape}")
    dim, segment_length, count = segments.shape
    _check_segment_length(segment_length)
    index = _segment_index(count, segment_length)
    span = (count - 1) * (segment_length // 2) + segment_length
    if frames > span:
        raise ShapeError(f"{count} segments of {segment_length} cannot cover {frames} frames")
    buffer = np.zeros((dim, span))
    np.add.at(buffer, (slice(None), index), segments.data)
    coverage = np.zeros(span)
    np.add.at(coverage, index, 1.0)
    out = buffer[:, :frames] / coverage[:frames]

    def _backward(g: np.ndarray):
        grad = np.zeros((dim, span))
        grad[:, :frames] = g / coverage[:frames]
        return (grad[:, index],)

    return record_result("overlap_add", (segments,), out, _backward)


__all__ = [
    "add",
    "concat",
    "div",
    "exp",
    "expand",
    "frame",
    "frame_count",
    "linear_scan",
    "log",
    "logsumexp",
    "matmul",
    "mean",
    "mul",
    "neg",
    "norm",
    "overlap_add",
    "overlap_add_frames",
    "relu",
    "reshape",
    "scale",
    "segment",
    "segment_count",
    "sigmoid",
    "softmax_rows",
    "softplus",
    "sq_l2",
    "sqrt",
    "square",
    "stack",
    "sub",
    "sum",
    "take",
    "tanh",
    "transpose",
]
