"""Distribution primitives: sampling, log-mass, and Fisher information.

Families are parameterized the way the fission recipes expect them:

* ``NegBin(r, theta)`` has pmf ``C(x+r-1, x) theta^r (1-theta)^x`` on the
  nonnegative integers, so ``theta`` is a success probability and the mean is
  ``r (1-theta) / theta``.
* ``Gaussian(mu, sigma_sq)`` carries the variance, not the standard deviation.
* Probability parameters live in the open interval (0, 1); degenerate
  distributions are rejected at construction.

Closed-form Fisher information (``fisher_info``) is cross-checked by a
numerical oracle (``fisher_info_numeric``) that differentiates the log-mass
centrally in the parameter and takes an exact expectation over the support
(truncated at cumulative mass 1 - 1e-12 for unbounded counts, Gauss-Hermite
quadrature for the Gaussian).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Family",
    "DistributionSpec",
    "SupportError",
    "TruncationError",
    "sample",
    "log_mass",
    "fisher_info",
    "fisher_info_numeric",
    "truncated_support",
    "enumerate_vector_support",
    "theoretical_mean",
    "theoretical_variance",
]

#: Cumulative-mass threshold for truncating unbounded count supports.
TRUNCATION_MASS = 1.0 - 1e-12

#: Hard cap on enumerated support points before raising TruncationError.
MAX_SUPPORT_POINTS = 1_000_000


class Family(Enum):
    BERNOULLI = "bernoulli"
    BINOMIAL = "binomial"
    POISSON = "poisson"
    NEGBIN = "negbin"
    GAUSSIAN = "gaussian"
    MULTINOMIAL = "multinomial"
    DIRICHLET_MULTINOMIAL = "dirichlet_multinomial"


class SupportError(ValueError):
    """A point lies outside the support of the distribution."""


class TruncationError(RuntimeError):
    """Support enumeration failed to reach the cumulative-mass threshold."""


def _check_open_unit(name: str, value: float) -> None:
    if not (0.0 < value < 1.0):
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {value}")


def _check_positive(name: str, value: float) -> None:
    if not (value > 0.0 and math.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite real, got {value}")


def _check_count(name: str, value: float) -> None:
    if value != int(value) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")


def _check_count_nonneg(name: str, value: float) -> None:
    if value != int(value) or value < 0:
        raise ValueError(f"{name} must be a nonnegative integer, got {value}")


@dataclass(frozen=True)
class DistributionSpec:
    """A named univariate (or count-vector) family with a parameter vector.

    ``params`` semantics by family:

    * BERNOULLI: ``(theta,)`` with theta in (0, 1)
    * BINOMIAL: ``(n, p)`` with integer n >= 1, p in (0, 1)
    * POISSON: ``(theta,)`` with theta > 0
    * NEGBIN: ``(r, theta)`` with r > 0, theta in (0, 1)
    * GAUSSIAN: ``(mu, sigma_sq)`` with sigma_sq > 0
    * MULTINOMIAL: ``(n, p_1, ..., p_K)`` probabilities on the open simplex
    * DIRICHLET_MULTINOMIAL: ``(n, a_1, ..., a_K)`` with all a_k > 0
    """

    family: Family
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        p = self.params
        if any(not math.isfinite(v) for v in p):
            raise ValueError("parameters must be finite")
        fam = self.family
        if fam is Family.BERNOULLI:
            if len(p) != 1:
                raise ValueError("Bernoulli takes (theta,)")
            _check_open_unit("theta", p[0])
        elif fam is Family.BINOMIAL:
            if len(p) != 2:
                raise ValueError("Binomial takes (n, p)")
            # n = 0 is allowed: Binomial(0, p) is the point mass at 0, which
            # arises as a conditional law when the conditioning fold is 0.
            _check_count_nonneg("n", p[0])
            _check_open_unit("p", p[1])
        elif fam is Family.POISSON:
            if len(p) != 1:
                raise ValueError("Poisson takes (theta,)")
            _check_positive("theta", p[0])
        elif fam is Family.NEGBIN:
            if len(p) != 2:
                raise ValueError("NegBin takes (r, theta)")
            _check_positive("r", p[0])
            _check_open_unit("theta", p[1])
        elif fam is Family.GAUSSIAN:
            if len(p) != 2:
                raise ValueError("Gaussian takes (mu, sigma_sq)")
            _check_positive("sigma_sq", p[1])
        elif fam is Family.MULTINOMIAL:
            if len(p) < 3:
                raise ValueError("Multinomial takes (n, p_1, ..., p_K) with K >= 2")
            _check_count("n", p[0])
            probs = p[1:]
            for v in probs:
                _check_open_unit("multinomial probability", v)
            if abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError(f"multinomial probabilities must sum to 1, got {sum(probs)}")
        elif fam is Family.DIRICHLET_MULTINOMIAL:
            if len(p) < 3:
                raise ValueError("DirichletMultinomial takes (n, a_1, ..., a_K) with K >= 2")
            _check_count("n", p[0])
            for v in p[1:]:
                _check_positive("concentration", v)
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown family {fam}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def bernoulli(theta: float) -> "DistributionSpec":
        return DistributionSpec(Family.BERNOULLI, (theta,))

    @staticmethod
    def binomial(n: int, p: float) -> "DistributionSpec":
        return DistributionSpec(Family.BINOMIAL, (n, p))

    @staticmethod
    def poisson(theta: float) -> "DistributionSpec":
        return DistributionSpec(Family.POISSON, (theta,))

    @staticmethod
    def negbin(r: float, theta: float) -> "DistributionSpec":
        return DistributionSpec(Family.NEGBIN, (r, theta))

    @staticmethod
    def gaussian(mu: float, sigma_sq: float) -> "DistributionSpec":
        return DistributionSpec(Family.GAUSSIAN, (mu, sigma_sq))

    @staticmethod
    def multinomial(n: int, probs) -> "DistributionSpec":
        return DistributionSpec(Family.MULTINOMIAL, (n, *probs))

    @staticmethod
    def dirichlet_multinomial(n: int, alphas) -> "DistributionSpec":
        return DistributionSpec(Family.DIRICHLET_MULTINOMIAL, (n, *alphas))

    # -- convenience accessors --------------------------------------------

    def _only(self, fam: Family) -> None:
        if self.family is not fam:
            raise AttributeError(f"accessor not defined for family {self.family}")

    @property
    def theta(self) -> float:
        if self.family in (Family.BERNOULLI, Family.POISSON):
            return self.params[0]
        if self.family is Family.NEGBIN:
            return self.params[1]
        raise AttributeError(f"theta not defined for family {self.family}")

    @property
    def r(self) -> float:
        self._only(Family.NEGBIN)
        return self.params[0]

    @property
    def mu(self) -> float:
        self._only(Family.GAUSSIAN)
        return self.params[0]

    @property
    def sigma_sq(self) -> float:
        self._only(Family.GAUSSIAN)
        return self.params[1]

    @property
    def trials(self) -> int:
        if self.family in (Family.BINOMIAL, Family.MULTINOMIAL, Family.DIRICHLET_MULTINOMIAL):
            return int(self.params[0])
        raise AttributeError(f"trials not defined for family {self.family}")


# -- sampling --------------------------------------------------------------


def sample(spec: DistributionSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. values; a ``(n, K)`` array for the vector families."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    fam, p = spec.family, spec.params
    if fam is Family.BERNOULLI:
        return rng.binomial(1, p[0], size=n)
    if fam is Family.BINOMIAL:
        return rng.binomial(int(p[0]), p[1], size=n)
    if fam is Family.POISSON:
        return rng.poisson(p[0], size=n)
    if fam is Family.NEGBIN:
        return rng.negative_binomial(p[0], p[1], size=n)
    if fam is Family.GAUSSIAN:
        return rng.normal(p[0], math.sqrt(p[1]), size=n)
    if fam is Family.MULTINOMIAL:
        return rng.multinomial(int(p[0]), np.asarray(p[1:]), size=n)
    if fam is Family.DIRICHLET_MULTINOMIAL:
        weights = rng.dirichlet(np.asarray(p[1:]), size=n)
        return rng.multinomial(int(p[0]), weights)
    raise ValueError(f"unknown family {fam}")  # pragma: no cover


# -- log mass / density ----------------------------------------------------


def _require_nonneg_int(x, fam: Family) -> int:
    xf = float(x)
    if xf != int(xf) or xf < 0:
        raise SupportError(f"{fam.value}: point {x} outside support (nonnegative integers)")
    return int(xf)


def log_mass(spec: DistributionSpec, x) -> float:
    """Log pmf (or pdf for the Gaussian) at ``x``.

    Raises :class:`SupportError` for points outside the support; never
    silently returns ``-inf``.
    """
    fam, p = spec.family, spec.params
    if fam is Family.BERNOULLI:
        xi = _require_nonneg_int(x, fam)
        if xi not in (0, 1):
            raise SupportError(f"bernoulli: point {x} outside {{0, 1}}")
        return math.log(p[0]) if xi == 1 else math.log1p(-p[0])
    if fam is Family.BINOMIAL:
        xi = _require_nonneg_int(x, fam)
        n, prob = int(p[0]), p[1]
        if xi > n:
            raise SupportError(f"binomial: point {x} exceeds trial count {n}")
        return (
            gammaln(n + 1) - gammaln(xi + 1) - gammaln(n - xi + 1)
            + xi * math.log(prob) + (n - xi) * math.log1p(-prob)
        )
    if fam is Family.POISSON:
        xi = _require_nonneg_int(x, fam)
        return xi * math.log(p[0]) - p[0] - gammaln(xi + 1)
    if fam is Family.NEGBIN:
        xi = _require_nonneg_int(x, fam)
        r, theta = p
        return (
            gammaln(xi + r) - gammaln(r) - gammaln(xi + 1)
            + r * math.log(theta) + xi * math.log1p(-theta)
        )
    if fam is Family.GAUSSIAN:
        mu, s2 = p
        xf = float(x)
        if not math.isfinite(xf):
            raise SupportError("gaussian: point must be finite")
        return -0.5 * math.log(2.0 * math.pi * s2) - (xf - mu) ** 2 / (2.0 * s2)
    if fam is Family.MULTINOMIAL:
        return _log_mass_multinomial(p, x)
    if fam is Family.DIRICHLET_MULTINOMIAL:
        return _log_mass_dirichlet_multinomial(p, x)
    raise ValueError(f"unknown family {fam}")  # pragma: no cover


def _check_count_vector(p, x, fam: Family) -> np.ndarray:
    xv = np.asarray(x, dtype=float)
    k = len(p) - 1
    n = int(p[0])
    if xv.shape != (k,):
        raise SupportError(f"{fam.value}: expected a length-{k} count vector")
    if np.any(xv != np.floor(xv)) or np.any(xv < 0) or int(xv.sum()) != n:
        raise SupportError(f"{fam.value}: counts must be nonnegative integers summing to {n}")
    return xv


def _log_mass_multinomial(p, x) -> float:
    xv = _check_count_vector(p, x, Family.MULTINOMIAL)
    n = int(p[0])
    probs = np.asarray(p[1:])
    return float(gammaln(n + 1) - gammaln(xv + 1).sum() + (xv * np.log(probs)).sum())


def _log_mass_dirichlet_multinomial(p, x) -> float:
    xv = _check_count_vector(p, x, Family.DIRICHLET_MULTINOMIAL)
    n = int(p[0])
    alphas = np.asarray(p[1:])
    a0 = alphas.sum()
    return float(
        gammaln(n + 1) - gammaln(xv + 1).sum()
        + gammaln(a0) - gammaln(n + a0)
        + (gammaln(xv + alphas) - gammaln(alphas)).sum()
    )


# -- support enumeration ---------------------------------------------------


def truncated_support(spec: DistributionSpec, mass: float = TRUNCATION_MASS) -> np.ndarray:
    """Integer support points of a scalar count family up to cumulative ``mass``.

    Bounded families (Bernoulli, Binomial) return their full support. For the
    Poisson and NegBin the enumeration walks up from 0 and stops once the
    cumulative pmf reaches ``mass``; exceeding ``MAX_SUPPORT_POINTS`` raises
    :class:`TruncationError`.
    """
    fam = spec.family
    if fam is Family.BERNOULLI:
        return np.array([0, 1])
    if fam is Family.BINOMIAL:
        return np.arange(int(spec.params[0]) + 1)
    if fam in (Family.POISSON, Family.NEGBIN):
        total = 0.0
        points = []
        for x in range(MAX_SUPPORT_POINTS):
            total += math.exp(log_mass(spec, x))
            points.append(x)
            if total >= mass:
                return np.array(points)
        raise TruncationError(
            f"{fam.value}{spec.params}: cumulative mass {total} below {mass} "
            f"after {MAX_SUPPORT_POINTS} points"
        )
    raise NotImplementedError(f"truncated_support not defined for family {fam}")


def enumerate_vector_support(spec: DistributionSpec):
    """All count vectors of a Multinomial / DirichletMultinomial (small n only)."""
    if spec.family not in (Family.MULTINOMIAL, Family.DIRICHLET_MULTINOMIAL):
        raise NotImplementedError("vector support only for multinomial-type families")
    n = int(spec.params[0])
    k = len(spec.params) - 1

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for rest in compositions(total - head, parts - 1):
                yield (head, *rest)

    return list(itertools.chain(compositions(n, k)))


# -- Fisher information ----------------------------------------------------


def fisher_info(spec: DistributionSpec, wrt: int = 0) -> float:
    """Closed-form Fisher information at the spec's parameter value.

    ``wrt`` indexes into ``params``. Pairs without a tractable closed form
    (NegBin overdispersion, the vector families) raise ``NotImplementedError``.
    """
    fam, p = spec.family, spec.params
    if fam is Family.BERNOULLI and wrt == 0:
        th = p[0]
        return 1.0 / (th * (1.0 - th))
    if fam is Family.BINOMIAL and wrt == 1:
        n, prob = p
        return n / (prob * (1.0 - prob))
    if fam is Family.POISSON and wrt == 0:
        return 1.0 / p[0]
    if fam is Family.NEGBIN and wrt == 1:
        r, th = p
        return r / (th * th * (1.0 - th))
    if fam is Family.GAUSSIAN and wrt == 0:
        return 1.0 / p[1]
    if fam is Family.GAUSSIAN and wrt == 1:
        return 1.0 / (2.0 * p[1] * p[1])
    raise NotImplementedError(f"no closed-form Fisher information for ({fam.value}, index {wrt})")


def fisher_info_numeric(spec: DistributionSpec, wrt: int = 0, h: float = 1e-4) -> float:
    """Numerical Fisher information: exact expectation of the squared score.

    The score is a central difference of ``log_mass`` in the parameter with
    step ``h``; the expectation is an exact sum over the (truncated) support
    for count families and Gauss-Hermite quadrature for the Gaussian.
    """
    if not (1e-6 <= h <= 1e-3):
        raise ValueError(f"h must lie in [1e-6, 1e-3], got {h}")
    fam = spec.family
    if fam in (Family.MULTINOMIAL, Family.DIRICHLET_MULTINOMIAL):
        raise NotImplementedError("numeric Fisher information is scalar-family only")

    up = _perturbed(spec, wrt, +h)
    down = _perturbed(spec, wrt, -h)

    if fam is Family.GAUSSIAN:
        nodes, weights = np.polynomial.hermite.hermgauss(101)
        mu, s2 = spec.params
        xs = mu + math.sqrt(2.0 * s2) * nodes
        scores = np.array([(log_mass(up, x) - log_mass(down, x)) / (2.0 * h) for x in xs])
        return float(np.sum(weights * scores**2) / math.sqrt(math.pi))

    points = truncated_support(spec)
    pmf = np.array([math.exp(log_mass(spec, x)) for x in points])
    scores = np.array([(log_mass(up, x) - log_mass(down, x)) / (2.0 * h) for x in points])
    return float(np.sum(pmf * scores**2))


def _perturbed(spec: DistributionSpec, wrt: int, delta: float) -> DistributionSpec:
    if not (0 <= wrt < len(spec.params)):
        raise ValueError(f"parameter index {wrt} out of range for {spec.family}")
    params = list(spec.params)
    params[wrt] += delta
    return replace(spec, params=tuple(params))


# -- moments (used by the verification suite) ------------------------------


def theoretical_mean(spec: DistributionSpec):
    fam, p = spec.family, spec.params
    if fam is Family.BERNOULLI:
        return p[0]
    if fam is Family.BINOMIAL:
        return p[0] * p[1]
    if fam is Family.POISSON:
        return p[0]
    if fam is Family.NEGBIN:
        r, th = p
        return r * (1.0 - th) / th
    if fam is Family.GAUSSIAN:
        return p[0]
    if fam is Family.MULTINOMIAL:
        return p[0] * np.asarray(p[1:])
    if fam is Family.DIRICHLET_MULTINOMIAL:
        alphas = np.asarray(p[1:])
        return p[0] * alphas / alphas.sum()
    raise ValueError(f"unknown family {fam}")  # pragma: no cover


def theoretical_variance(spec: DistributionSpec):
    fam, p = spec.family, spec.params
    if fam is Family.BERNOULLI:
        return p[0] * (1.0 - p[0])
    if fam is Family.BINOMIAL:
        return p[0] * p[1] * (1.0 - p[1])
    if fam is Family.POISSON:
        return p[0]
    if fam is Family.NEGBIN:
        r, th = p
        return r * (1.0 - th) / (th * th)
    if fam is Family.GAUSSIAN:
        return p[1]
    if fam is Family.MULTINOMIAL:
        probs = np.asarray(p[1:])
        return p[0] * probs * (1.0 - probs)
    if fam is Family.DIRICHLET_MULTINOMIAL:
        n = p[0]
        alphas = np.asarray(p[1:])
        a0 = alphas.sum()
        frac = alphas / a0
        return n * frac * (1.0 - frac) * (n + a0) / (1.0 + a0)
    raise ValueError(f"unknown family {fam}")  # pragma: no cover
