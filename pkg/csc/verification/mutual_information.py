"""Exact and Monte-Carlo oracles for the mutual-information bound of the contrastive loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from csc.exceptions import ConfigurationError, InvalidDistributionError, QuadratureError

NORMALISATION_TOL = 1e-12
MIN_GAUSSIAN_SAMPLES = 10_000
QUADRATURE_TOL = 1e-8
ROUNDING_SLACK = 1e-12

Scorer = Literal["ratio"] | np.ndarray | Callable[[int, int], float]


@dataclass(frozen=True)
class DiscreteJoint:
    """Speaker prior ``p(n)`` and conditional table ``p(z_k | n)`` over a finite alphabet."""

    prior: np.ndarray
    conditional: np.ndarray
    alphabet: np.ndarray | None = None

    def __post_init__(self) -> None:
        prior = np.asarray(self.prior, dtype=np.float64)
        conditional = np.asarray(self.conditional, dtype=np.float64)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "conditional", conditional)
        if prior.ndim != 1 or conditional.ndim != 2 or conditional.shape[0] != prior.shape[0]:
            raise InvalidDistributionError(
                f"prior {prior.shape} and conditional {conditional.shape} do not describe N speakers"
            )
        if np.any(prior < 0) or np.any(conditional < 0):
            raise InvalidDistributionError("probabilities must not be negative")
        if abs(prior.sum() - 1.0) > NORMALISATION_TOL:
            raise InvalidDistributionError(f"prior sums to {prior.sum()!r}, not 1")
        row_sums = conditional.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > NORMALISATION_TOL):
            raise InvalidDistributionError(f"conditional rows sum to {row_sums.tolist()}, not 1")
        if self.alphabet is not None:
            alphabet = np.asarray(self.alphabet, dtype=np.float64)
            if alphabet.ndim != 2 or alphabet.shape[0] != conditional.shape[1]:
                raise InvalidDistributionError("alphabet needs one embedding per conditional column")
            object.__setattr__(self, "alphabet", alphabet)

    @property
    def speakers(self) -> int:
        return int(self.prior.shape[0])

    @property
    def joint(self) -> np.ndarray:
        return self.prior[:, None] * self.conditional

    @property
    def marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    @property
    def uniform_prior(self) -> bool:
        return bool(np.all(np.abs(self.prior - 1.0 / self.speakers) <= NORMALISATION_TOL))

    def transposed(self) -> "DiscreteJoint":
        """The same joint read as a prior over ``z`` and a conditional ``p(n | z)``."""
        marginal = self.marginal
        support = marginal > 0
        posterior = (self.joint[:, support] / marginal[support]).T
        return DiscreteJoint(prior=marginal[support], conditional=posterior)


def exact_mi(joint: DiscreteJoint) -> float:
    """``I(E; Z)`` in nats with ``0 log 0 = 0``."""
    table = joint.joint
    marginal = joint.marginal
    total = 0.0
    for n in range(joint.speakers):
        for k in range(table.shape[1]):
            if table[n, k] > 0.0:
                total += table[n, k] * math.log(joint.conditional[n, k] / marginal[k])
    return total


def prior_entropy(joint: DiscreteJoint) -> float:
    p = joint.prior[joint.prior > 0]
    return float(-(p * np.log(p)).sum())


def ratio_scores(joint: DiscreteJoint) -> np.ndarray:
    """Exact density ratio ``p(z_k | n) / p(z_k)``; zero on unused symbols."""
    marginal = joint.marginal
    scores = np.zeros_like(joint.conditional)
    support = marginal > 0
    scores[:, support] = joint.conditional[:, support] / marginal[support]
    return scores


def kernel_scores(alphabet: np.ndarray, centroids: np.ndarray, alpha: float) -> np.ndarray:
    """``exp(-alpha ||z_k - E_n||^2)`` as an ``N x K`` table."""
    diff = np.asarray(centroids)[:, None, :] - np.asarray(alphabet)[None, :, :]
    return np.exp(-alpha * np.sum(diff * diff, axis=2))


def _score_table(joint: DiscreteJoint, scorer: Scorer) -> np.ndarray:
    if isinstance(scorer, str):
        if scorer != "ratio":
            raise ConfigurationError(f"unknown scorer {scorer!r}")
        return ratio_scores(joint)
    if callable(scorer):
        return np.array(
            [[scorer(n, k) for k in range(joint.conditional.shape[1])] for n in range(joint.speakers)],
            dtype=np.float64,
        )
    table = np.asarray(scorer, dtype=np.float64)
    if table.shape != joint.conditional.shape:
        raise ConfigurationError(f"score table {table.shape} does not match {joint.conditional.shape}")
    return table


def exact_csc_loss(joint: DiscreteJoint, scorer: Scorer = "ratio") -> float:
    """Expected contrastive loss over the joint, with any positive scorer."""
    scores = _score_table(joint, scorer)
    table = joint.joint
    column_totals = scores.sum(axis=0)
    total = 0.0
    for n in range(joint.speakers):
        for k in range(table.shape[1]):
            if table[n, k] <= 0.0:
                continue
            if scores[n, k] <= 0.0:
                raise InvalidDistributionError(f"scorer is zero on the supported pair (n={n}, k={k})")
            total += table[n, k] * -math.log(scores[n, k] / column_totals[k])
    return total


@dataclass(frozen=True)
class ProofForms:
    direct: float
    one_plus_others: float
    independent_others: float
    bound: float

    @property
    def independent_others_deviation(self) -> float:
        return self.independent_others - self.direct


def bound_proof_forms(joint: DiscreteJoint) -> ProofForms:
    """The loss with exact ratios written the ways the bound argument rewrites it.

    ``independent_others`` replaces every non-target ratio by one, the value it
    takes when the other speakers are independent of ``z``.
    """
    scores = ratio_scores(joint)
    table = joint.joint
    count = joint.speakers
    direct = one_plus = independent = bound = 0.0
    for n in range(count):
        for k in range(table.shape[1]):
            weight = table[n, k]
            if weight <= 0.0:
                continue
            target = scores[n, k]
            others = scores[:, k].sum() - target
            direct += weight * -math.log(target / scores[:, k].sum())
            one_plus += weight * math.log1p(others / target)
            independent += weight * math.log1p((count - 1) / target)
            bound += weight * math.log(count / target)
    return ProofForms(direct=direct, one_plus_others=one_plus, independent_others=independent, bound=bound)


@dataclass(frozen=True)
class MiBoundReport:
    loss: float
    mi: float
    log_n: float
    bound_gap: float
    prior_entropy: float
    entropy_gap: float
    uniform_prior: bool
    tolerance: float = NORMALISATION_TOL

    @property
    def passed(self) -> bool:
        gap = self.bound_gap if self.uniform_prior else self.entropy_gap
        return gap >= -self.tolerance


def verify_mi_bound(joint: DiscreteJoint, scorer: Scorer = "ratio") -> MiBoundReport:
    """``loss - (ln N - I)`` for uniform priors; ``loss - (H(E) - I)`` is checked otherwise."""
    loss = exact_csc_loss(joint, scorer)
    mi = exact_mi(joint)
    log_n = math.log(joint.speakers)
    entropy = prior_entropy(joint)
    return MiBoundReport(
        loss=loss,
        mi=mi,
        log_n=log_n,
        bound_gap=loss - (log_n - mi),
        prior_entropy=entropy,
        entropy_gap=loss - (entropy - mi),
        uniform_prior=joint.uniform_prior,
    )


def random_joint(rng: np.random.Generator, speakers: int, alphabet_size: int, *, uniform: bool = True) -> DiscreteJoint:
    conditional = rng.dirichlet(np.full(alphabet_size, 0.5), size=speakers)
    conditional /= conditional.sum(axis=1, keepdims=True)
    prior = np.full(speakers, 1.0 / speakers) if uniform else rng.dirichlet(np.ones(speakers))
    prior /= prior.sum()
    return DiscreteJoint(prior=prior, conditional=conditional)


# Gaussian clusters


@dataclass(frozen=True)
class GaussianClusterModel:
    """Uniform mixture of isotropic Gaussians ``N(E_n, (2 alpha)^-1 I)``; centroids may coincide."""

    centroids: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        centroids = np.atleast_2d(np.asarray(self.centroids, dtype=np.float64))
        object.__setattr__(self, "centroids", centroids)
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if centroids.shape[0] < 1:
            raise ConfigurationError("at least one centroid is required")

    @property
    def speakers(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    @property
    def variance(self) -> float:
        return 1.0 / (2.0 * self.alpha)

    @classmethod
    def symmetric_pair(cls, separation: float, alpha: float = 0.5) -> "GaussianClusterModel":
        return cls(centroids=np.array([[-separation / 2.0], [separation / 2.0]]), alpha=alpha)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abserr: float


def gaussian_mixture_mi(model: GaussianClusterModel) -> QuadratureResult:
    """``I(E; Z) = h(Z) - h(Z | E)`` for ``D == 1`` by adaptive quadrature."""

    if model.dim != 1:
        raise ConfigurationError("quadrature MI is only available for one-dimensional clusters")
    centres = model.centroids[:, 0]
    sigma = math.sqrt(model.variance)
    log_norm = -math.log(model.speakers) - 0.5 * math.log(2.0 * math.pi * model.variance)

    def integrand(z: float) -> float:
        log_density = logsumexp(-((z - centres) ** 2) / (2.0 * model.variance)) + log_norm
        return -math.exp(log_density) * log_density

    lower = float(centres.min() - 12.0 * sigma)
    upper = float(centres.max() + 12.0 * sigma)
    result = integrate.quad(
        integrand,
        lower,
        upper,
        points=sorted(set(centres.tolist())),
        limit=200,
        epsabs=1e-12,
        epsrel=1e-12,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3 or abserr > QUADRATURE_TOL:
        raise QuadratureError(f"quadrature did not converge (abserr={abserr:.3e})")
    conditional_entropy = 0.5 * math.log(2.0 * math.pi * math.e * model.variance)
    return QuadratureResult(value=value - conditional_entropy, abserr=abserr)


@dataclass(frozen=True)
class GaussianBoundReport:
    separation: float
    samples: int
    mi: float
    mi_abserr: float
    loss_mean: float
    loss_standard_error: float
    log_n: float

    @property
    def lower_side(self) -> float:
        return self.log_n - self.loss_mean

    @property
    def combined_error(self) -> float:
        return self.loss_standard_error + self.mi_abserr

    @property
    def margin(self) -> float:
        return self.mi + 3.0 * self.combined_error + ROUNDING_SLACK - self.lower_side

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


def sample_contrastive_losses(model: GaussianClusterModel, samples: int, rng: np.random.Generator) -> np.ndarray:
    speakers = rng.integers(model.speakers, size=samples)
    z = model.centroids[speakers] + math.sqrt(model.variance) * rng.standard_normal((samples, model.dim))
    diff = z[:, None, :] - model.centroids[None, :, :]
    scaled = model.alpha * np.sum(diff * diff, axis=2)
    return scaled[np.arange(samples), speakers] + logsumexp(-scaled, axis=1)


def gaussian_bound_experiment(model: GaussianClusterModel, samples: int, *, seed: int = 0) -> GaussianBoundReport:
    if samples < MIN_GAUSSIAN_SAMPLES:
        raise ConfigurationError(f"the Gaussian bound experiment needs at least {MIN_GAUSSIAN_SAMPLES} samples")
    mi = gaussian_mixture_mi(model)
    losses = sample_contrastive_losses(model, samples, np.random.default_rng(seed))
    separation = float(np.ptp(model.centroids[:, 0])) if model.dim == 1 else float("nan")
    return GaussianBoundReport(
        separation=separation,
        samples=samples,
        mi=mi.value,
        mi_abserr=mi.abserr,
        loss_mean=float(losses.mean()),
        loss_standard_error=float(losses.std(ddof=1) / math.sqrt(samples)),
        log_n=math.log(model.speakers),
    )


def separation_sweep(
    separations: Sequence[float], *, alpha: float = 0.5, samples: int = 100_000, seed: int = 0
) -> list[GaussianBoundReport]:
    return [
        gaussian_bound_experiment(GaussianClusterModel.symmetric_pair(s, alpha), samples, seed=seed + index)
        for index, s in enumerate(separations)
    ]


__all__ = [
    "DiscreteJoint",
    "GaussianBoundReport",
    "GaussianClusterModel",
    "MiBoundReport",
    "ProofForms",
    "bound_proof_forms",
    "exact_csc_loss",
    "exact_mi",
    "gaussian_bound_experiment",
    "gaussian_mixture_mi",
    "kernel_scores",
    "prior_entropy",
    "random_joint",
    "ratio_scores",
    "sample_contrastive_losses",
    "separation_sweep",
    "verify_mi_bound",
]
