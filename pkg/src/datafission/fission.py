"""Fission operators: split one draw into folds with known laws.

Each operator takes a realized draw ``x`` (scalar or array), consumes
randomness from an explicit generator, and returns the folds together with

* the reconstruction function tag (folds sum to x, or the second fold *is* x),
* the declared marginal law of fold 1, and
* the declared conditional law of fold 2 given fold 1.

Declared laws that depend on unknown truth are returned as templates: callables
taking the unknown parameters as keyword arguments (``theta``, ``mu``,
``sigma_sq``, ``r``) and returning a concrete
:class:`~datafission.distributions.DistributionSpec`. The operators themselves
never read the unknown parameters; splitting uses only the observed draw, the
tuning parameters, and whatever parameters the recipe assumes known.

Independent-fold recipes ("P1"): Gaussian with known variance, Poisson
thinning (the K-fold generalization is exposed for the Poisson), NegBin with
known overdispersion. Dependent-fold recipes ("P2"): Poisson additive-noise,
NegBin via Poisson thinning, Bernoulli label flipping, and Gaussian splitting
with a guessed variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .distributions import DistributionSpec

__all__ = [
    "RuleKind",
    "Reconstruction",
    "FissionRule",
    "FoldPair",
    "FoldSet",
    "fission_gaussian_p1",
    "fission_gaussian_misspec_p2",
    "fission_poisson_thin",
    "fission_poisson_tau_p2",
    "fission_negbin_p1",
    "fission_negbin_via_poisson_p2",
    "fission_bernoulli_p2",
    "conditional_law",
    "reconstruct",
]


class RuleKind(Enum):
    GAUSSIAN_P1 = "gaussian-p1"
    GAUSSIAN_MISSPEC_P2 = "gaussian-misspec-p2"
    POISSON_THIN_P1 = "poisson-thin-p1"
    POISSON_TAU_P2 = "poisson-tau-p2"
    NEGBIN_P1 = "negbin-p1"
    NEGBIN_VIA_POISSON_P2 = "negbin-via-poisson-p2"
    BERNOULLI_P2 = "bernoulli-p2"


#: Rules whose folds are independent.
P1_KINDS = frozenset({RuleKind.GAUSSIAN_P1, RuleKind.POISSON_THIN_P1, RuleKind.NEGBIN_P1})


class Reconstruction(Enum):
    SUM = "sum"
    SECOND_FOLD_IS_X = "second-fold-is-x"


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie strictly inside (0, 1), got {eps}")
    return eps


@dataclass(frozen=True)
class FissionRule:
    """A split recipe plus its tuning parameters.

    Exactly the fields relevant to ``kind`` are set; the rest are None. For
    ``POISSON_THIN_P1`` either a scalar ``eps`` (two folds, probabilities
    ``(eps, 1 - eps)``) or a full probability vector ``eps_vector`` on the
    open simplex is accepted.
    """

    kind: RuleKind
    eps: Optional[float] = None
    eps_vector: Optional[tuple[float, ...]] = None
    tau: Optional[float] = None
    sigma_tilde_sq: Optional[float] = None
    known_r: Optional[float] = None

    def __post_init__(self) -> None:
        allowed = {
            RuleKind.GAUSSIAN_P1: {"eps"},
            RuleKind.GAUSSIAN_MISSPEC_P2: {"eps", "sigma_tilde_sq"},
            RuleKind.POISSON_THIN_P1: {"eps", "eps_vector"},
            RuleKind.POISSON_TAU_P2: {"tau"},
            RuleKind.NEGBIN_P1: {"eps", "known_r"},
            RuleKind.NEGBIN_VIA_POISSON_P2: {"eps"},
            RuleKind.BERNOULLI_P2: {"eps"},
        }[self.kind]
        for name in ("eps", "eps_vector", "tau", "sigma_tilde_sq", "known_r"):
            value = getattr(self, name)
            if name in allowed:
                continue
            if value is not None:
                raise ValueError(f"field {name} is not used by rule {self.kind.value}")
        if self.kind is RuleKind.POISSON_THIN_P1:
            if (self.eps is None) == (self.eps_vector is None):
                raise ValueError("poisson-thin-p1 takes either eps or eps_vector, not both")
            if self.eps is not None:
                _check_eps(self.eps)
            else:
                vec = tuple(float(v) for v in self.eps_vector)
                if len(vec) < 2 or any(not (0.0 < v < 1.0) for v in vec):
                    raise ValueError("eps_vector entries must lie in (0, 1) with K >= 2")
                if abs(sum(vec) - 1.0) > 1e-9:
                    raise ValueError(f"eps_vector must sum to 1, got {sum(vec)}")
                object.__setattr__(self, "eps_vector", vec)
        else:
            if "eps" in allowed:
                if self.eps is None:
                    raise ValueError(f"rule {self.kind.value} requires eps")
                _check_eps(self.eps)
        if self.kind is RuleKind.POISSON_TAU_P2:
            if self.tau is None or not (self.tau > 0):
                raise ValueError("poisson-tau-p2 requires tau > 0")
        if self.kind is RuleKind.GAUSSIAN_MISSPEC_P2:
            if self.sigma_tilde_sq is None or not (self.sigma_tilde_sq > 0):
                raise ValueError("gaussian-misspec-p2 requires sigma_tilde_sq > 0")
        if self.kind is RuleKind.NEGBIN_P1:
            if self.known_r is None or not (self.known_r > 0):
                raise ValueError("negbin-p1 requires known_r > 0")

    @property
    def thin_probs(self) -> tuple[float, ...]:
        if self.kind is not RuleKind.POISSON_THIN_P1:
            raise AttributeError("thin_probs only defined for poisson-thin-p1")
        if self.eps_vector is not None:
            return self.eps_vector
        return (self.eps, 1.0 - self.eps)

    @property
    def k(self) -> int:
        """Number of folds (2 for everything except vector-valued thinning)."""
        if self.kind is RuleKind.POISSON_THIN_P1:
            return len(self.thin_probs)
        return 2

    @property
    def is_p1(self) -> bool:
        return self.kind in P1_KINDS

    # -- constructors ------------------------------------------------------

    @staticmethod
    def gaussian_p1(eps: float) -> "FissionRule":
        return FissionRule(RuleKind.GAUSSIAN_P1, eps=eps)

    @staticmethod
    def gaussian_misspec_p2(eps: float, sigma_tilde_sq: float) -> "FissionRule":
        return FissionRule(RuleKind.GAUSSIAN_MISSPEC_P2, eps=eps, sigma_tilde_sq=sigma_tilde_sq)

    @staticmethod
    def poisson_thin(eps) -> "FissionRule":
        if np.isscalar(eps):
            return FissionRule(RuleKind.POISSON_THIN_P1, eps=float(eps))
        return FissionRule(RuleKind.POISSON_THIN_P1, eps_vector=tuple(eps))

    @staticmethod
    def poisson_tau_p2(tau: float) -> "FissionRule":
        return FissionRule(RuleKind.POISSON_TAU_P2, tau=tau)

    @staticmethod
    def negbin_p1(eps: float, known_r: float) -> "FissionRule":
        return FissionRule(RuleKind.NEGBIN_P1, eps=eps, known_r=known_r)

    @staticmethod
    def negbin_via_poisson_p2(eps: float) -> "FissionRule":
        return FissionRule(RuleKind.NEGBIN_VIA_POISSON_P2, eps=eps)

    @staticmethod
    def bernoulli_p2(eps: float) -> "FissionRule":
        return FissionRule(RuleKind.BERNOULLI_P2, eps=eps)


@dataclass
class FoldPair:
    """Realized folds plus the declared laws and reconstruction tag.

    ``fold1_law`` maps hypothesized unknown parameters (keyword arguments) to
    the declared marginal law of fold 1. ``fold2_conditional`` maps a fold-1
    value plus the unknowns to the declared conditional law of fold 2; for
    independent-fold rules it ignores the fold-1 value and returns fold 2's
    marginal. It is None for the misspecified Gaussian split, whose
    conditional law is not exposed (only the joint moments are declared).
    """

    fold1: np.ndarray
    fold2: np.ndarray
    reconstruction: Reconstruction
    rule_kind: RuleKind
    fold1_law: Callable[..., DistributionSpec] = field(repr=False)
    fold2_conditional: Optional[Callable[..., DistributionSpec]] = field(repr=False, default=None)


@dataclass
class FoldSet:
    """K folds from thinning; the folds always sum to the original draw."""

    folds: np.ndarray  # last axis indexes the K folds
    probs: tuple[float, ...]
    rule_kind: RuleKind = RuleKind.POISSON_THIN_P1
    reconstruction: Reconstruction = Reconstruction.SUM

    def fold(self, k: int) -> np.ndarray:
        return self.folds[..., k]

    def fold_law(self, k: int, *, theta: float) -> DistributionSpec:
        """Declared marginal of fold k when the input was Poisson(theta)."""
        return DistributionSpec.poisson(self.probs[k] * theta)

    def as_pair(self) -> FoldPair:
        """View a two-fold thinning as a FoldPair with its declared laws."""
        if len(self.probs) != 2:
            raise ValueError("as_pair requires exactly two folds")
        e1, e2 = self.probs
        return FoldPair(
            fold1=self.folds[..., 0],
            fold2=self.folds[..., 1],
            reconstruction=Reconstruction.SUM,
            rule_kind=self.rule_kind,
            fold1_law=lambda *, theta: DistributionSpec.poisson(e1 * theta),
            fold2_conditional=lambda at, *, theta: DistributionSpec.poisson(e2 * theta),
        )


# -- validation helpers ----------------------------------------------------


def _as_counts(x) -> np.ndarray:
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.integer):
        if np.any(arr != np.floor(arr)):
            raise ValueError("count input must be integer-valued")
        arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("count input must be nonnegative")
    return arr


def _as_binary(y) -> np.ndarray:
    arr = _as_counts(y)
    if np.any(arr > 1):
        raise ValueError("binary input must be 0/1")
    return arr


# -- operators -------------------------------------------------------------


def _gaussian_split(x, split_var: float, eps: float, rng: np.random.Generator):
    x = np.asarray(x, dtype=float)
    noise_sd = math.sqrt(eps * (1.0 - eps) * split_var)
    w = rng.normal(0.0, noise_sd, size=x.shape)
    return eps * x + w, (1.0 - eps) * x - w


def fission_gaussian_p1(x, sigma_sq: float, eps: float, rng: np.random.Generator) -> FoldPair:
    """Split a Gaussian draw with known variance into independent folds.

    Given X = x the folds are jointly normal with means (eps*x, (1-eps)*x),
    equal variances eps*(1-eps)*sigma_sq, and perfectly negative correlation,
    so they sum to x exactly. Marginally fold1 ~ N(eps*theta, eps*sigma_sq)
    and fold2 ~ N((1-eps)*theta, (1-eps)*sigma_sq), independent.
    """
    eps = _check_eps(eps)
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    f1, f2 = _gaussian_split(x, sigma_sq, eps, rng)
    return FoldPair(
        fold1=f1,
        fold2=f2,
        reconstruction=Reconstruction.SUM,
        rule_kind=RuleKind.GAUSSIAN_P1,
        fold1_law=lambda *, theta: DistributionSpec.gaussian(eps * theta, eps * sigma_sq),
        fold2_conditional=lambda at, *, theta: DistributionSpec.gaussian(
            (1.0 - eps) * theta, (1.0 - eps) * sigma_sq
        ),
    )


def fission_gaussian_misspec_p2(
    x, sigma_tilde_sq: float, eps: float, rng: np.random.Generator
) -> FoldPair:
    """Gaussian split with a guessed variance in place of the true one.

    Uses the known-variance recipe verbatim with sigma_tilde_sq, so with
    sigma_tilde_sq equal to the true variance it reduces to
    :func:`fission_gaussian_p1` (identical code path, identical folds for the
    same stream). In general the folds are jointly normal with marginal
    variances ``eps^2 sigma_sq + eps (1-eps) sigma_tilde_sq`` (fold 1),
    ``(1-eps)^2 sigma_sq + eps (1-eps) sigma_tilde_sq`` (fold 2), and
    covariance ``eps (1-eps) (sigma_sq - sigma_tilde_sq)``, where sigma_sq is
    the unknown true variance. ``fold1_law`` takes the hypothesized
    ``mu`` and ``sigma_sq``; the conditional law of fold 2 is not exposed.
    """
    eps = _check_eps(eps)
    if not sigma_tilde_sq > 0:
        raise ValueError("sigma_tilde_sq must be positive")
    f1, f2 = _gaussian_split(x, sigma_tilde_sq, eps, rng)

    def fold1_law(*, mu: float, sigma_sq: float) -> DistributionSpec:
        var = eps * eps * sigma_sq + eps * (1.0 - eps) * sigma_tilde_sq
        return DistributionSpec.gaussian(eps * mu, var)

    return FoldPair(
        fold1=f1,
        fold2=f2,
        reconstruction=Reconstruction.SUM,
        rule_kind=RuleKind.GAUSSIAN_MISSPEC_P2,
        fold1_law=fold1_law,
        fold2_conditional=None,
    )


def misspec_gaussian_joint_moments(
    eps: float, sigma_sq: float, sigma_tilde_sq: float, mu: float = 0.0
):
    """Declared joint moments of the misspecified Gaussian split.

    Returns (mean vector, covariance matrix) of (fold1, fold2) for the given
    true mean/variance and guessed variance.
    """
    ee = eps * (1.0 - eps)
    mean = np.array([eps * mu, (1.0 - eps) * mu])
    cov = np.array(
        [
            [eps * eps * sigma_sq + ee * sigma_tilde_sq, ee * (sigma_sq - sigma_tilde_sq)],
            [ee * (sigma_sq - sigma_tilde_sq), (1.0 - eps) ** 2 * sigma_sq + ee * sigma_tilde_sq],
        ]
    )
    return mean, cov


def fission_poisson_thin(x, eps, rng: np.random.Generator) -> FoldSet:
    """Thin a count into K folds that are multinomial given the draw.

    ``eps`` is a scalar (two folds) or a probability vector on the open
    simplex. When the input is Poisson(theta) the folds are mutually
    independent with fold k ~ Poisson(eps_k * theta).
    """
    rule = FissionRule.poisson_thin(eps)
    probs = rule.thin_probs
    counts = _as_counts(x)
    folds = rng.multinomial(counts, np.asarray(probs))
    return FoldSet(folds=folds, probs=probs)


def fission_poisson_tau_p2(x, tau: float, rng: np.random.Generator) -> FoldPair:
    """Dependent Poisson split: fold1 = x + Poisson(tau) noise, fold2 = x.

    Declared laws for Poisson(theta) input: fold1 ~ Poisson(theta + tau) and
    fold2 | fold1 ~ Binomial(fold1, theta / (theta + tau)). The recipe states
    only these laws; the additive construction realizes them (the classic
    split of a Poisson sum into binomial components).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    counts = _as_counts(x)
    z = rng.poisson(tau, size=counts.shape)
    return FoldPair(
        fold1=counts + z,
        fold2=counts.copy(),
        reconstruction=Reconstruction.SECOND_FOLD_IS_X,
        rule_kind=RuleKind.POISSON_TAU_P2,
        fold1_law=lambda *, theta: DistributionSpec.poisson(theta + tau),
        fold2_conditional=lambda at, *, theta: DistributionSpec.binomial(
            int(at), theta / (theta + tau)
        ),
    )


def fission_negbin_p1(x, r: float, eps: float, rng: np.random.Generator) -> FoldPair:
    """Split a NegBin draw with known overdispersion r into independent folds.

    Given X = x, fold1 is Beta-Binomial: p ~ Beta(eps*r, (1-eps)*r) then
    fold1 ~ Binomial(x, p), the two-component Dirichlet-multinomial.
    Marginally fold1 ~ NB(eps*r, theta), fold2 ~ NB((1-eps)*r, theta),
    independent.
    """
    eps = _check_eps(eps)
    if not r > 0:
        raise ValueError("r must be positive")
    counts = _as_counts(x)
    p = rng.beta(eps * r, (1.0 - eps) * r, size=counts.shape)
    f1 = rng.binomial(counts, p)
    return FoldPair(
        fold1=f1,
        fold2=counts - f1,
        reconstruction=Reconstruction.SUM,
        rule_kind=RuleKind.NEGBIN_P1,
        fold1_law=lambda *, theta: DistributionSpec.negbin(eps * r, theta),
        fold2_conditional=lambda at, *, theta: DistributionSpec.negbin((1.0 - eps) * r, theta),
    )


def fission_negbin_via_poisson_p2(x, eps: float, rng: np.random.Generator) -> FoldPair:
    """Apply Poisson thinning to a NegBin draw (no parameter knowledge needed).

    The folds are binomial splits of x. For NB(r, theta) input the declared
    laws are fold1 ~ NB(r, theta / (theta + eps - eps*theta)) and
    fold2 | fold1 ~ NB(r + fold1, theta + eps - eps*theta); the folds are
    dependent because the thinning was derived for the wrong (Poisson) family.
    """
    eps = _check_eps(eps)
    counts = _as_counts(x)
    f1 = rng.binomial(counts, eps)

    def fold1_law(*, r: float, theta: float) -> DistributionSpec:
        g = theta + eps - eps * theta
        return DistributionSpec.negbin(r, theta / g)

    def fold2_conditional(at, *, r: float, theta: float) -> DistributionSpec:
        g = theta + eps - eps * theta
        return DistributionSpec.negbin(r + at, g)

    return FoldPair(
        fold1=f1,
        fold2=counts - f1,
        reconstruction=Reconstruction.SUM,
        rule_kind=RuleKind.NEGBIN_VIA_POISSON_P2,
        fold1_law=fold1_law,
        fold2_conditional=fold2_conditional,
    )


def fission_bernoulli_p2(y, eps: float, rng: np.random.Generator) -> FoldPair:
    """Split a binary draw by randomized label flipping: fold2 is y itself.

    fold1 flips y with probability eps. For Bernoulli(theta) input:
    fold1 ~ Bernoulli(theta + eps - 2*theta*eps) and
    fold2 | fold1 ~ Bernoulli(theta / (theta + (1-theta) *
    (eps/(1-eps))**(2*fold1 - 1))). At eps = 1/2 the conditional reduces to
    Bernoulli(theta): fold1 then carries no information.
    """
    eps = _check_eps(eps)
    yv = _as_binary(y)
    z = rng.binomial(1, eps, size=yv.shape)
    f1 = yv ^ z if yv.shape else int(yv) ^ int(z)

    def fold2_conditional(at, *, theta: float) -> DistributionSpec:
        odds_shift = (eps / (1.0 - eps)) ** (2 * int(at) - 1)
        return DistributionSpec.bernoulli(theta / (theta + (1.0 - theta) * odds_shift))

    return FoldPair(
        fold1=np.asarray(f1),
        fold2=yv.copy(),
        reconstruction=Reconstruction.SECOND_FOLD_IS_X,
        rule_kind=RuleKind.BERNOULLI_P2,
        fold1_law=lambda *, theta: DistributionSpec.bernoulli(theta + eps - 2.0 * theta * eps),
        fold2_conditional=fold2_conditional,
    )


# -- shared accessors ------------------------------------------------------


def conditional_law(pair: FoldPair, at, **unknowns) -> DistributionSpec:
    """Declared law of fold 2 given fold1 = ``at``.

    For independent-fold rules this is the (fold-1-free) marginal of fold 2.
    Unknown truth parameters are supplied as keyword arguments (``theta``,
    ``r``, ...). The misspecified Gaussian split declares joint moments only
    and raises ``NotImplementedError`` here.
    """
    if pair.fold2_conditional is None:
        raise NotImplementedError(
            f"rule {pair.rule_kind.value} does not expose a conditional law; "
            "see misspec_gaussian_joint_moments for its declared joint moments"
        )
    return pair.fold2_conditional(at, **unknowns)


def reconstruct(split: FoldPair | FoldSet):
    """Apply the reconstruction function T to recover the original draw."""
    if isinstance(split, FoldSet):
        return split.folds.sum(axis=-1)
    if split.reconstruction is Reconstruction.SUM:
        return split.fold1 + split.fold2
    return split.fold2
