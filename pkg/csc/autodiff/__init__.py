"""Reverse-mode automatic differentiation over numpy f64 arrays."""

from csc.autodiff import ops
from csc.autodiff.gradcheck import GradcheckResult, gradcheck
from csc.autodiff.tensor import Tape, Tensor, active_tape, as_tensor, backward

__all__ = [
    "GradcheckResult",
    "Tape",
    "Tensor",
    "active_tape",
    "as_tensor",
    "backward",
    "gradcheck",
    "ops",
]
