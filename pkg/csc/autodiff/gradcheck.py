from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from csc.autodiff.tensor import Tape, Tensor, backward


@dataclass(frozen=True, slots=True)
class GradcheckResult:
    max_relative_error: float
    per_tensor: tuple[float, ...]
    coordinates_checked: int

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error < tolerance


def gradcheck(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    *,
    h: float = 1e-5,
    max_coordinates: int | None = 64,
    seed: int = 0,
    atol: float = 1e-7,
) -> GradcheckResult:
    """Compare analytic gradients of ``fn()`` against central finite differences.

    ``fn`` must rebuild the graph from ``tensors`` on every call. At most
    ``max_coordinates`` entries per tensor are perturbed, sampled with ``seed``.
    The error per tensor is ``||analytic - numeric|| / max(||analytic||, ||numeric||, atol)``
    over the sampled coordinates.
    """

    for tensor in tensors:
        tensor.zero_grad()
    with Tape() as tape:
        loss = fn()
    backward(loss, tape)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    rng = np.random.default_rng(seed)
    errors: list[float] = []
    checked = 0
    for tensor, grad in zip(tensors, analytic):
        flat_size = tensor.size
        if max_coordinates is not None and flat_size > max_coordinates:
            coords = rng.choice(flat_size, size=max_coordinates, replace=False)
        else:
            coords = np.arange(flat_size)
        numeric = np.empty(len(coords))
        flat = tensor.data.reshape(-1)
        for i, coord in enumerate(coords):
            original = flat[coord]
            flat[coord] = original + h
            plus = fn().item()
            flat[coord] = original - h
            minus = fn().item()
            flat[coord] = original
            numeric[i] = (plus - minus) / (2.0 * h)
        sampled = grad.reshape(-1)[coords]
        scale = max(float(np.linalg.norm(sampled)), float(np.linalg.norm(numeric)), atol)
        errors.append(float(np.linalg.norm(sampled - numeric)) / scale)
        checked += len(coords)
        tensor.zero_grad()

    return GradcheckResult(
        max_relative_error=max(errors, default=0.0),
        per_tensor=tuple(errors),
        coordinates_checked=checked,
    )


__all__ = ["GradcheckResult", "gradcheck"]
