from __future__ import annotations

from typing import Mapping

import numpy as np

from csc.autodiff.tensor import Tensor
from csc.exceptions import CheckpointError, ConfigurationError, NonFiniteError


class Adam:
    """Adaptive moment estimation with bias correction over named parameters.

    Parameters without a gradient after backward are left untouched and keep
    their moments.
    """

    def __init__(
        self,
        parameters: Mapping[str, Tensor],
        *,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if lr <= 0:
            raise ConfigurationError("lr must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigurationError("betas must lie in [0, 1)")
        self.parameters = dict(parameters)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first_moment = {name: np.zeros_like(t.data) for name, t in self.parameters.items()}
        self.second_moment = {name: np.zeros_like(t.data) for name, t in self.parameters.items()}

    def zero_grad(self) -> None:
        for tensor in self.parameters.values():
            tensor.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, tensor in self.parameters.items():
            grad = tensor.grad
            if grad is None:
                continue
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(f"gradient of {name} is not finite")
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays: dict[str, np.ndarray] = {}
        for name in self.parameters:
            arrays[f"m.{name}"] = self.first_moment[name].copy()
            arrays[f"v.{name}"] = self.second_moment[name].copy()
        return arrays

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray], step_count: int) -> None:
        for name, tensor in self.parameters.items():
            try:
                first, second = arrays[f"m.{name}"], arrays[f"v.{name}"]
            except KeyError as exc:
                raise CheckpointError(f"optimizer state for {name} is missing") from exc
            if first.shape != tensor.shape or second.shape != tensor.shape:
                raise CheckpointError(f"optimizer state for {name} has the wrong shape")
            self.first_moment[name] = np.array(first, dtype=np.float64)
            self.second_moment[name] = np.array(second, dtype=np.float64)
        self.step_count = step_count


__all__ = ["Adam"]
