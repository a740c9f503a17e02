from __future__ import annotations

import math

import numpy as np

from csc.autodiff import ops
from csc.autodiff.tensor import Tensor, as_tensor
from csc.exceptions import DegenerateSignalError, ShapeError

CAP_RATIO = 1e-6
SI_SNR_CAP_DB = 10.0 * math.log10(1.0 / CAP_RATIO)
_DB_PER_NEPER = 10.0 / math.log(10.0)
_ENERGY_FLOOR = 1e-300


def si_snr(estimate: Tensor | np.ndarray, reference: Tensor | np.ndarray) -> Tensor:
    """Scale-invariant SNR in dB with a smooth cap at +/-60 dB.

    Both signals are made zero-mean. With ``s`` the projection of the estimate
    on the reference and ``e`` the residual the value is
    ``10 log10((|s|^2 + t|e|^2) / (|e|^2 + t|s|^2))`` with ``t = 1e-6``.
    """

    est = as_tensor(estimate)
    ref = as_tensor(reference)
    if est.ndim != 1 or est.shape != ref.shape:
        raise ShapeError(f"si_snr needs equal-length waveforms, got {est.shape} and {ref.shape}")

    ref_centred = ops.sub(ref, ops.mean(ref))
    ref_energy = ops.sum(ops.square(ref_centred))
    if ref_energy.item() <= 0.0:
        raise DegenerateSignalError("si_snr reference has zero energy")

    est_centred = ops.sub(est, ops.mean(est))
    projection = ops.div(ops.sum(ops.mul(est_centred, ref_centred)), ref_energy)
    target = ops.mul(projection, ref_centred)
    residual = ops.sub(est_centred, target)
    target_energy = ops.sum(ops.square(target))
    residual_energy = ops.sum(ops.square(residual))

    numerator = ops.add(ops.add(target_energy, ops.scale(residual_energy, CAP_RATIO)), _ENERGY_FLOOR)
    denominator = ops.add(ops.add(residual_energy, ops.scale(target_energy, CAP_RATIO)), _ENERGY_FLOOR)
    return ops.scale(ops.log(ops.div(numerator, denominator)), _DB_PER_NEPER)


def si_snr_value(estimate: np.ndarray, reference: np.ndarray) -> float:
    return si_snr(Tensor(estimate), Tensor(reference)).item()


def si_snr_improvement(estimate: np.ndarray, reference: np.ndarray, mixture: np.ndarray) -> float:
    """SI-SNR gain of ``estimate`` over the unprocessed mixture."""
    return si_snr_value(estimate, reference) - si_snr_value(mixture, reference)


__all__ = ["CAP_RATIO", "SI_SNR_CAP_DB", "si_snr", "si_snr_improvement", "si_snr_value"]
