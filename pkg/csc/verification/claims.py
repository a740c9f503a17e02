"""Self-contained oracle suite behind ``csc verify-claims``."""

from __future__ import annotations

import math
import time
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from common.logging import get_logger
from csc.autodiff.tensor import Tape, Tensor, backward
from csc.exceptions import GradientContractError
from csc.objectives.contrastive import csc_loss, decomposition_paths, norm_cancellation, rescaling_identity
from csc.verification.mutual_information import (
    DiscreteJoint,
    GaussianClusterModel,
    bound_proof_forms,
    exact_mi,
    gaussian_bound_experiment,
    gaussian_mixture_mi,
    random_joint,
    verify_mi_bound,
)

logger = get_logger("csc.verify")

IDENTITY_TOL = 1e-9
EXACT_TOL = 1e-12
DIRECTIONAL_STEP = 1e-3
GAUSSIAN_SEPARATIONS = (0.0, 0.75, 1.5, 2.25, 3.0)
JOINT_SPEAKER_COUNTS = (2, 3, 4, 8)


class ClaimCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    value: float
    tolerance: float
    criterion: str
    instances: int
    informational: bool = False
    details: dict[str, Any] = Field(default_factory=dict)


class ClaimReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    perturb: float
    checks: list[ClaimCheck]
    elapsed_s: float

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]


def _relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _loss_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), 1.0)


def _random_batch(rng: np.random.Generator, speakers: int, dim: int) -> tuple[list[tuple[np.ndarray, int]], np.ndarray]:
    rows = rng.standard_normal((speakers, dim))
    size = int(rng.integers(1, 7))
    batch = [(rng.standard_normal(dim), int(rng.integers(speakers))) for _ in range(size)]
    return batch, rows


def check_density_identity(rng: np.random.Generator, instances: int, perturb: float) -> ClaimCheck:
    worst = 0.0
    for _ in range(instances):
        dim = int(rng.integers(1, 9))
        z, e = rng.standard_normal(dim), rng.standard_normal(dim)
        alpha = float(rng.uniform(0.05, 2.0))
        lhs, rhs = rescaling_identity(z, e, alpha)
        worst = max(worst, _relative_error(lhs, rhs * (1.0 + perturb)))
    return ClaimCheck(
        name="infonce_rescaling_identity",
        passed=worst < IDENTITY_TOL,
        value=worst,
        tolerance=IDENTITY_TOL,
        criterion="max |lhs - rhs| / lhs < tolerance",
        instances=instances,
        details={"perturb": perturb},
    )


def check_norm_invariance(rng: np.random.Generator, instances: int) -> ClaimCheck:
    worst = 0.0
    for _ in range(instances):
        batch, rows = _random_batch(rng, 4, int(rng.integers(1, 9)))
        with_f, with_fhat = norm_cancellation(batch, rows, float(rng.uniform(0.05, 2.0)))
        worst = max(worst, _loss_error(with_f, with_fhat))
    return ClaimCheck(
        name="norm_term_cancellation",
        passed=worst < IDENTITY_TOL,
        value=worst,
        tolerance=IDENTITY_TOL,
        criterion="max |L_f - L_fhat| / max(|L_f|, 1) < tolerance",
        instances=instances,
    )


def check_decomposition(rng: np.random.Generator, instances: int) -> ClaimCheck:
    worst = 0.0
    for _ in range(instances):
        batch, rows = _random_batch(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        decomposed, direct = decomposition_paths(batch, rows, float(rng.uniform(0.05, 2.0)))
        worst = max(worst, _loss_error(decomposed, direct))
    return ClaimCheck(
        name="log_space_decomposition",
        passed=worst < IDENTITY_TOL,
        value=worst,
        tolerance=IDENTITY_TOL,
        criterion="max |decomposed - direct| / max(|direct|, 1) < tolerance",
        instances=instances,
    )


def _directional_instance(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    while True:
        rows = rng.standard_normal((2, 3))
        z = rows[0] + 0.5 * rng.standard_normal(3)
        closer = np.sum((z - rows[0]) ** 2) < np.sum((z - rows[1]) ** 2)
        towards_other = float(np.dot(z - rows[0], rows[1] - rows[0])) > 0.0
        if closer and towards_other:
            return z, rows


def directional_step(z: np.ndarray, rows: np.ndarray, alpha: float, step: float) -> np.ndarray:
    """One gradient-descent step on ``z`` for the loss with target row 0."""
    z_tensor = Tensor(z, requires_grad=True)
    with Tape() as tape:
        loss = csc_loss([(z_tensor, 0)], Tensor(rows), alpha)
    backward(loss, tape)
    if z_tensor.grad is None:
        raise GradientContractError("csc_loss produced no gradient for the embedding")
    return z - step * z_tensor.grad


def check_directional(rng: np.random.Generator, instances: int) -> ClaimCheck:
    """Target pull and non-target push of one descent step on ``Z``.

    The push away from the other speaker holds whenever ``Z`` is closer to its
    own row. The pull toward the target additionally needs ``Z`` on the other
    speaker's side of the target row, so instances are drawn from that region.
    """

    violations = 0
    smallest_change = math.inf
    for _ in range(instances):
        z, rows = _directional_instance(rng)
        alpha = float(rng.uniform(0.1, 1.0))
        stepped = directional_step(z, rows, alpha, DIRECTIONAL_STEP)
        target_change = np.linalg.norm(z - rows[0]) - np.linalg.norm(stepped - rows[0])
        other_change = np.linalg.norm(stepped - rows[1]) - np.linalg.norm(z - rows[1])
        smallest_change = min(smallest_change, float(target_change), float(other_change))
        if not (target_change > 0.0 and other_change > 0.0):
            violations += 1
    return ClaimCheck(
        name="gradient_direction",
        passed=violations == 0,
        value=float(violations),
        tolerance=0.0,
        criterion="violations == 0",
        instances=instances,
        details={"step": DIRECTIONAL_STEP, "smallest_change": smallest_change},
    )


def check_bound_random_joints(rng: np.random.Generator, joints: int) -> ClaimCheck:
    worst = math.inf
    for index in range(joints):
        speakers = JOINT_SPEAKER_COUNTS[index % len(JOINT_SPEAKER_COUNTS)]
        joint = random_joint(rng, speakers, int(rng.integers(2, 17)))
        worst = min(worst, verify_mi_bound(joint).bound_gap)
    return ClaimCheck(
        name="mi_bound_random_joints",
        passed=worst >= -EXACT_TOL,
        value=worst,
        tolerance=EXACT_TOL,
        criterion="min(L - (ln N - I)) >= -tolerance",
        instances=joints,
    )


def _bijective_joint(speakers: int) -> DiscreteJoint:
    return DiscreteJoint(prior=np.full(speakers, 1.0 / speakers), conditional=np.eye(speakers))


def _independent_joint(speakers: int, alphabet: int) -> DiscreteJoint:
    return DiscreteJoint(
        prior=np.full(speakers, 1.0 / speakers),
        conditional=np.full((speakers, alphabet), 1.0 / alphabet),
    )


def check_bound_tight_cases() -> ClaimCheck:
    reports = {
        "bijective": verify_mi_bound(_bijective_joint(2)),
        "independent": verify_mi_bound(_independent_joint(3, 5)),
    }
    worst = max(abs(report.bound_gap) for report in reports.values())
    mi_error = abs(reports["bijective"].mi - math.log(2.0)) + abs(reports["independent"].mi)
    return ClaimCheck(
        name="mi_bound_tight_cases",
        passed=worst <= EXACT_TOL and mi_error <= EXACT_TOL,
        value=worst,
        tolerance=EXACT_TOL,
        criterion="|gap| <= tolerance on bijective and independent joints",
        instances=len(reports),
        details={name: {"loss": r.loss, "mi": r.mi, "gap": r.bound_gap} for name, r in reports.items()},
    )


def check_proof_forms(rng: np.random.Generator, joints: int) -> list[ClaimCheck]:
    worst = 0.0
    deviation = 0.0
    for index in range(joints):
        speakers = JOINT_SPEAKER_COUNTS[index % len(JOINT_SPEAKER_COUNTS)]
        forms = bound_proof_forms(random_joint(rng, speakers, int(rng.integers(2, 17))))
        worst = max(worst, abs(forms.direct - forms.one_plus_others))
        deviation = max(deviation, abs(forms.independent_others_deviation))
    return [
        ClaimCheck(
            name="bound_rewrite_agreement",
            passed=worst <= EXACT_TOL,
            value=worst,
            tolerance=EXACT_TOL,
            criterion="|direct - one_plus_others| <= tolerance",
            instances=joints,
        ),
        ClaimCheck(
            name="independent_others_rewrite",
            passed=True,
            value=deviation,
            tolerance=math.inf,
            criterion="reported only",
            instances=joints,
            informational=True,
        ),
    ]


def check_nonuniform_priors(rng: np.random.Generator, joints: int) -> ClaimCheck:
    worst = math.inf
    log_n_violations = 0
    for index in range(joints):
        speakers = JOINT_SPEAKER_COUNTS[index % len(JOINT_SPEAKER_COUNTS)]
        report = verify_mi_bound(random_joint(rng, speakers, int(rng.integers(2, 17)), uniform=False))
        worst = min(worst, report.entropy_gap)
        if report.bound_gap < -EXACT_TOL:
            log_n_violations += 1
    return ClaimCheck(
        name="entropy_bound_nonuniform_priors",
        passed=worst >= -EXACT_TOL,
        value=worst,
        tolerance=EXACT_TOL,
        criterion="min(L - (H(E) - I)) >= -tolerance",
        instances=joints,
        details={"log_n_form_violations": log_n_violations},
    )


def check_mi_symmetry(rng: np.random.Generator, joints: int) -> ClaimCheck:
    worst = 0.0
    for index in range(joints):
        speakers = JOINT_SPEAKER_COUNTS[index % len(JOINT_SPEAKER_COUNTS)]
        joint = random_joint(rng, speakers, int(rng.integers(2, 17)), uniform=bool(index % 2))
        worst = max(worst, abs(exact_mi(joint) - exact_mi(joint.transposed())))
    return ClaimCheck(
        name="mi_symmetry",
        passed=worst <= EXACT_TOL,
        value=worst,
        tolerance=EXACT_TOL,
        criterion="|I(E;Z) - I(Z;E)| <= tolerance",
        instances=joints,
    )


def check_gaussian_sweep(seed: int, samples: int) -> ClaimCheck:
    points = []
    worst_margin = math.inf
    for index, separation in enumerate(GAUSSIAN_SEPARATIONS):
        report = gaussian_bound_experiment(
            GaussianClusterModel.symmetric_pair(separation, alpha=0.5), samples, seed=seed + index
        )
        worst_margin = min(worst_margin, report.margin)
        points.append(
            {
                "separation": separation,
                "mi": report.mi,
                "loss_mean": report.loss_mean,
                "standard_error": report.loss_standard_error,
                "gap": report.mi - report.lower_side,
                "passed": report.passed,
            }
        )
    coincident = gaussian_mixture_mi(GaussianClusterModel.symmetric_pair(0.0, alpha=0.5)).value
    return ClaimCheck(
        name="gaussian_cluster_bound",
        passed=worst_margin >= 0.0 and abs(coincident) <= 1e-9,
        value=worst_margin,
        tolerance=3.0,
        criterion="ln N - L_hat <= I_hat + tolerance * combined standard error",
        instances=samples * len(GAUSSIAN_SEPARATIONS),
        details={"sweep": points, "coincident_mi": coincident},
    )


def run_claim_suite(
    *,
    seed: int = 0,
    perturb: float = 0.0,
    instances: int = 1000,
    joints: int = 100,
    gaussian_samples: int = 100_000,
) -> ClaimReport:
    """Run every oracle check; a nonzero ``perturb`` corrupts the rescaling identity."""

    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    builders: list[Callable[[], ClaimCheck | list[ClaimCheck]]] = [
        lambda: check_density_identity(rng, instances, perturb),
        lambda: check_norm_invariance(rng, instances),
        lambda: check_decomposition(rng, instances),
        lambda: check_directional(rng, max(20, instances // 10)),
        lambda: check_bound_random_joints(rng, joints),
        check_bound_tight_cases,
        lambda: check_proof_forms(rng, joints),
        lambda: check_nonuniform_priors(rng, joints),
        lambda: check_mi_symmetry(rng, joints),
        lambda: check_gaussian_sweep(seed, gaussian_samples),
    ]
    checks: list[ClaimCheck] = []
    for build in builders:
        produced = build()
        for check in produced if isinstance(produced, list) else [produced]:
            logger.info(
                "claim check finished",
                extra={
                    "event": "csc.verify.check",
                    "context": {"name": check.name, "passed": check.passed, "value": check.value},
                },
            )
            checks.append(check)

    report = ClaimReport(seed=seed, perturb=perturb, checks=checks, elapsed_s=time.perf_counter() - started)
    if not report.passed:
        logger.warning(
            "claim suite failed",
            extra={"event": "csc.verify.failed", "context": {"failures": report.failures}},
        )
    return report


__all__ = [
    "ClaimCheck",
    "ClaimReport",
    "check_bound_random_joints",
    "check_bound_tight_cases",
    "check_decomposition",
    "check_density_identity",
    "check_directional",
    "check_gaussian_sweep",
    "check_mi_symmetry",
    "check_nonuniform_priors",
    "check_norm_invariance",
    "check_proof_forms",
    "directional_step",
    "run_claim_suite",
]
