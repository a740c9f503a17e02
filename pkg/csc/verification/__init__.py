from csc.verification.claims import ClaimCheck, ClaimReport, run_claim_suite
from csc.verification.mutual_information import (
    DiscreteJoint,
    GaussianClusterModel,
    exact_csc_loss,
    exact_mi,
    gaussian_bound_experiment,
    gaussian_mixture_mi,
    verify_mi_bound,
)

__all__ = [
    "ClaimCheck",
    "ClaimReport",
    "DiscreteJoint",
    "GaussianClusterModel",
    "exact_csc_loss",
    "exact_mi",
    "gaussian_bound_experiment",
    "gaussian_mixture_mi",
    "run_claim_suite",
    "verify_mi_bound",
]
