"""Fisher-information accounting for fission rules.

Splitting a draw cannot create information: the information in the original
draw decomposes as the information carried by fold 1 plus the expected
conditional information left in fold 2,

    I_X(theta) = I_fold1(theta) + E_fold1[ I_fold2|fold1(theta) ].

For independent-fold rules the conditional term is constant (fold 2's
marginal information). For dependent-fold rules the conditional information
varies with fold 1, and by Jensen's inequality the *expected inverse*
conditional information, which drives confidence-interval width downstream,
can only be worse than the inverse one would get from an independent split
carrying the same training information. In the Poisson case it is infinite:
fold1 = 0 has positive probability and leaves zero conditional information.

All expectations here average exact closed-form conditional informations over
Monte-Carlo draws of fold 1; nothing is estimated from scores. Infinite
expectations are detected analytically, by locating zero-information support
points with positive mass, never by watching an average diverge. Scalar
parameters only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from .distributions import DistributionSpec, Family
from .fission import FissionRule, RuleKind

__all__ = [
    "InfoReport",
    "InverseCondInfo",
    "InequalityCheck",
    "CalibrationError",
    "chain_rule_check",
    "conditional_info_poisson_tau",
    "expected_inverse_cond_info",
    "calibrate_equal_training_info",
    "information_inequality_check",
    "audit_poisson_pair",
]


class CalibrationError(ValueError):
    """Raised when rules that must carry equal training information do not."""


@dataclass
class InfoReport:
    """Information ledger for one (rule, truth) pair.

    ``i_fold2_marginal`` is set only for independent-fold rules, where the
    conditional information does not depend on fold 1 and
    ``e_cond_info == i_fold2_marginal`` exactly. ``e_inverse_cond_info`` may
    be ``inf``. ``mc_se`` maps field names to Monte-Carlo standard errors;
    exact entries carry 0.0.
    """

    i_x: float
    i_fold1: float
    i_fold2_marginal: Optional[float]
    e_cond_info: float
    e_inverse_cond_info: float
    mc_se: dict = field(default_factory=dict)
    n_mc: int = 0

    def __post_init__(self) -> None:
        for name in ("i_x", "i_fold1", "e_cond_info"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= -1e-12):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.e_inverse_cond_info < 0:
            raise ValueError("e_inverse_cond_info must be nonnegative")

    @property
    def chain_gap(self) -> float:
        """i_fold1 + conditional term minus i_x; should sit within MC noise."""
        second = self.i_fold2_marginal if self.i_fold2_marginal is not None else self.e_cond_info
        return self.i_fold1 + second - self.i_x

    def to_dict(self) -> dict:
        return {
            "i_x": self.i_x,
            "i_fold1": self.i_fold1,
            "i_fold2_marginal": self.i_fold2_marginal,
            "e_cond_info": self.e_cond_info,
            "e_inverse_cond_info": self.e_inverse_cond_info,
            "mc_se": dict(self.mc_se),
            "n_mc": self.n_mc,
            "chain_gap": self.chain_gap,
        }


@dataclass
class InverseCondInfo:
    """E[(conditional information)^-1], possibly infinite.

    When infinite, ``offending_point``/``offending_mass`` identify a fold-1
    value with positive probability and zero conditional information (the
    mass is exact, not estimated). When finite, ``value`` is a Monte-Carlo
    mean with ``mc_se``, and ``partial_means`` records the running mean at
    checkpoints so a reader can see the average has settled.
    """

    value: float
    infinite: bool
    offending_point: Optional[int] = None
    offending_mass: Optional[float] = None
    mc_se: Optional[float] = None
    n_mc: int = 0
    partial_means: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value": None if self.infinite else self.value,
            "infinite": self.infinite,
            "offending_point": self.offending_point,
            "offending_mass": self.offending_mass,
            "mc_se": self.mc_se,
            "n_mc": self.n_mc,
            "partial_means": list(self.partial_means),
        }


@dataclass
class InequalityCheck:
    """Result of comparing a dependent split against a calibrated independent one.

    ``lhs`` is E[(conditional info of the dependent split)^-1]; ``rhs`` is the
    inverse marginal fold-2 information of the independent split. ``holds`` is
    None when the comparison is not applicable (no independent split exists
    for the family).
    """

    applicable: bool
    holds: Optional[bool]
    lhs: Optional[InverseCondInfo] = None
    rhs: Optional[float] = None
    margin: Optional[float] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "holds": self.holds,
            "lhs": self.lhs.to_dict() if self.lhs is not None else None,
            "rhs": self.rhs,
            "margin": self.margin,
            "reason": self.reason,
        }


# -- closed forms ----------------------------------------------------------


def _wrt_for(truth: DistributionSpec) -> int:
    # index of the audited parameter: theta sits at 1 for the NegBin (after
    # r), at 0 elsewhere; for the Gaussian the audit is with respect to mu.
    return 1 if truth.family is Family.NEGBIN else 0


def _require(cond: bool, rule: FissionRule, truth: DistributionSpec) -> None:
    if not cond:
        raise NotImplementedError(
            f"no closed-form information audit for rule {rule.kind.value} "
            f"on family {truth.family.value}"
        )


def _fold1_info(rule: FissionRule, truth: DistributionSpec) -> float:
    """Closed-form Fisher information of the declared fold-1 law."""
    k, fam = rule.kind, truth.family
    if k is RuleKind.GAUSSIAN_P1:
        _require(fam is Family.GAUSSIAN, rule, truth)
        return rule.eps / truth.sigma_sq
    if k is RuleKind.POISSON_THIN_P1:
        _require(fam is Family.POISSON and rule.k == 2, rule, truth)
        return rule.thin_probs[0] / truth.theta
    if k is RuleKind.NEGBIN_P1:
        _require(fam is Family.NEGBIN, rule, truth)
        if abs(rule.known_r - truth.r) > 1e-12:
            raise ValueError("negbin-p1 audit requires rule.known_r to equal the true r")
        th = truth.theta
        return rule.eps * truth.r / (th * th * (1.0 - th))
    if k is RuleKind.POISSON_TAU_P2:
        _require(fam is Family.POISSON, rule, truth)
        return 1.0 / (truth.theta + rule.tau)
    if k is RuleKind.BERNOULLI_P2:
        _require(fam is Family.BERNOULLI, rule, truth)
        th, e = truth.theta, rule.eps
        q = th + e - 2.0 * th * e
        return (1.0 - 2.0 * e) ** 2 / (q * (1.0 - q))
    if k is RuleKind.NEGBIN_VIA_POISSON_P2:
        _require(fam is Family.NEGBIN, rule, truth)
        th, e, r = truth.theta, rule.eps, truth.r
        g = th + e - e * th
        return r * e / (th * th * (1.0 - th) * g)
    raise NotImplementedError(f"no fold-1 information closed form for {k.value}")


def _fold2_marginal_info(rule: FissionRule, truth: DistributionSpec) -> float:
    """Marginal fold-2 information, defined for independent-fold rules."""
    k = rule.kind
    if k is RuleKind.GAUSSIAN_P1:
        return (1.0 - rule.eps) / truth.sigma_sq
    if k is RuleKind.POISSON_THIN_P1:
        return rule.thin_probs[1] / truth.theta
    if k is RuleKind.NEGBIN_P1:
        th = truth.theta
        return (1.0 - rule.eps) * truth.r / (th * th * (1.0 - th))
    raise NotImplementedError(f"rule {k.value} has no fold-1-free fold-2 marginal")


def conditional_info_poisson_tau(theta: float, tau: float, fold1_value: float) -> float:
    """Conditional fold-2 information tau * fold1 / (theta * (theta+tau)^2).

    Zero at fold1_value = 0: observing fold1 = 0 pins fold2 = 0 under the
    additive construction, and the declared Binomial(0, .) conditional carries
    no information about theta.
    """
    if not (theta > 0 and tau > 0):
        raise ValueError("theta and tau must be positive")
    if fold1_value < 0:
        raise ValueError("fold1_value must be nonnegative")
    return tau * fold1_value / (theta * (theta + tau) ** 2)


def _conditional_info_fn(
    rule: FissionRule, truth: DistributionSpec
) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized closed-form conditional information as a function of fold 1."""
    k, fam = rule.kind, truth.family
    if k is RuleKind.POISSON_TAU_P2:
        _require(fam is Family.POISSON, rule, truth)
        th, tau = truth.theta, rule.tau

        def f(f1):
            return tau * np.asarray(f1, dtype=float) / (th * (th + tau) ** 2)

        return f
    if k is RuleKind.BERNOULLI_P2:
        _require(fam is Family.BERNOULLI, rule, truth)
        th, e = truth.theta, rule.eps

        def f(f1):
            c = (e / (1.0 - e)) ** (2.0 * np.asarray(f1, dtype=float) - 1.0)
            d = th + (1.0 - th) * c
            return c / (d * d * th * (1.0 - th))

        return f
    if k is RuleKind.NEGBIN_VIA_POISSON_P2:
        _require(fam is Family.NEGBIN, rule, truth)
        th, e, r = truth.theta, rule.eps, truth.r
        g = th + e - e * th

        def f(f1):
            return (r + np.asarray(f1, dtype=float)) * (1.0 - e) / (g * g * (1.0 - th))

        return f
    if rule.is_p1:
        const = _fold2_marginal_info(rule, truth)

        def f(f1):
            return np.full(np.shape(f1), const, dtype=float)

        return f
    raise NotImplementedError(
        f"no conditional-information closed form for rule {k.value} on {fam.value}"
    )


def _fold1_spec(rule: FissionRule, truth: DistributionSpec) -> DistributionSpec:
    """Declared marginal law of fold 1 under the true parameters."""
    k, fam = rule.kind, truth.family
    if k is RuleKind.POISSON_THIN_P1 and fam is Family.POISSON:
        return DistributionSpec.poisson(rule.thin_probs[0] * truth.theta)
    if k is RuleKind.POISSON_TAU_P2 and fam is Family.POISSON:
        return DistributionSpec.poisson(truth.theta + rule.tau)
    if k is RuleKind.BERNOULLI_P2 and fam is Family.BERNOULLI:
        th, e = truth.theta, rule.eps
        return DistributionSpec.bernoulli(th + e - 2.0 * th * e)
    if k is RuleKind.NEGBIN_VIA_POISSON_P2 and fam is Family.NEGBIN:
        th, e = truth.theta, rule.eps
        g = th + e - e * th
        return DistributionSpec.negbin(truth.r, th / g)
    if k is RuleKind.NEGBIN_P1 and fam is Family.NEGBIN:
        return DistributionSpec.negbin(rule.eps * truth.r, truth.theta)
    if k is RuleKind.GAUSSIAN_P1 and fam is Family.GAUSSIAN:
        return DistributionSpec.gaussian(rule.eps * truth.mu, rule.eps * truth.sigma_sq)
    raise NotImplementedError(
        f"no declared fold-1 law for rule {k.value} on family {fam.value}"
    )


# -- operations ------------------------------------------------------------


def chain_rule_check(
    rule: FissionRule,
    truth: DistributionSpec,
    n_mc: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> InfoReport:
    """Assemble the information ledger and its chain-rule decomposition.

    ``i_x`` comes from the base family's closed form, ``i_fold1`` from the
    declared fold-1 law, and the conditional term either exactly (independent
    folds) or by averaging the closed-form conditional information over
    ``n_mc`` draws of fold 1.
    """
    i_x = dist.fisher_info(truth, _wrt_for(truth))
    i_f1 = _fold1_info(rule, truth)
    if rule.is_p1:
        i_f2 = _fold2_marginal_info(rule, truth)
        return InfoReport(
            i_x=i_x,
            i_fold1=i_f1,
            i_fold2_marginal=i_f2,
            e_cond_info=i_f2,
            e_inverse_cond_info=(math.inf if i_f2 == 0.0 else 1.0 / i_f2),
            mc_se={"e_cond_info": 0.0, "e_inverse_cond_info": 0.0},
            n_mc=0,
        )
    if rng is None:
        raise ValueError("dependent-fold rules need an rng for the Monte-Carlo average")
    cond_fn = _conditional_info_fn(rule, truth)
    draws = dist.sample(_fold1_spec(rule, truth), rng, n_mc)
    infos = cond_fn(draws)
    e_cond = float(infos.mean())
    se_cond = float(infos.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    inv = expected_inverse_cond_info(rule, truth, n_mc=n_mc, rng=rng)
    return InfoReport(
        i_x=i_x,
        i_fold1=i_f1,
        i_fold2_marginal=None,
        e_cond_info=e_cond,
        e_inverse_cond_info=inv.value,
        mc_se={"e_cond_info": se_cond, "e_inverse_cond_info": inv.mc_se},
        n_mc=n_mc,
    )


def expected_inverse_cond_info(
    rule: FissionRule,
    truth: DistributionSpec,
    n_mc: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> InverseCondInfo:
    """E over fold 1 of the inverse conditional fold-2 information.

    For independent-fold rules this is exactly the inverse marginal fold-2
    information. For dependent-fold rules the fold-1 support is first scanned
    for zero-information points carrying positive mass; finding one certifies
    the expectation is infinite and the exact offending mass is reported.
    Only if no such point exists is a Monte-Carlo estimate returned.
    """
    if rule.is_p1:
        i_f2 = _fold2_marginal_info(rule, truth)
        return InverseCondInfo(value=1.0 / i_f2, infinite=False, mc_se=0.0)
    cond_fn = _conditional_info_fn(rule, truth)
    f1_spec = _fold1_spec(rule, truth)
    support = dist.truncated_support(f1_spec)
    infos_on_support = cond_fn(support)
    zero = infos_on_support == 0.0
    if np.any(zero):
        pts = support[zero]
        mass = float(sum(math.exp(dist.log_mass(f1_spec, int(p))) for p in pts))
        return InverseCondInfo(
            value=math.inf,
            infinite=True,
            offending_point=int(pts[0]),
            offending_mass=mass,
        )
    if rng is None:
        raise ValueError("finite case needs an rng for the Monte-Carlo estimate")
    draws = dist.sample(f1_spec, rng, n_mc)
    inv = 1.0 / cond_fn(draws)
    checkpoints = [n_mc // 10 * j for j in range(1, 10) if n_mc // 10 * j > 0] + [n_mc]
    partial = tuple(float(inv[:c].mean()) for c in checkpoints)
    return InverseCondInfo(
        value=float(inv.mean()),
        infinite=False,
        mc_se=float(inv.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0,
        n_mc=n_mc,
        partial_means=partial,
    )


def calibrate_equal_training_info(p1_rule: FissionRule, truth: DistributionSpec) -> float:
    """Noise level tau giving the dependent Poisson split the same fold-1 info.

    Solves eps/theta = 1/(theta + tau), i.e. tau = theta * (1 - eps) / eps.
    Only the Poisson thinning / additive-noise pairing is implemented.
    """
    if p1_rule.kind is not RuleKind.POISSON_THIN_P1 or truth.family is not Family.POISSON:
        raise NotImplementedError("calibration is implemented for the Poisson pairing only")
    if p1_rule.k != 2:
        raise NotImplementedError("calibration assumes a two-fold split")
    eps = p1_rule.thin_probs[0]
    return truth.theta * (1.0 - eps) / eps


def information_inequality_check(
    p1_rule: Optional[FissionRule],
    p2_rule: Optional[FissionRule],
    truth: DistributionSpec,
    n_mc: int = 100_000,
    rng: Optional[np.random.Generator] = None,
) -> InequalityCheck:
    """Check E[(cond info)^-1] >= (marginal fold-2 info of the P1 rule)^-1.

    Both rules must carry the same fold-1 information (within 1e-6); an
    infinite left side satisfies the inequality trivially. For the Bernoulli
    there is no independent split to compare against, so the result is a
    not-applicable signal rather than a verdict.
    """
    if truth.family is Family.BERNOULLI or p1_rule is None:
        return InequalityCheck(
            applicable=False,
            holds=None,
            reason="no independent-fold split exists for this family; comparison undefined",
        )
    i1_p1 = _fold1_info(p1_rule, truth)
    i1_p2 = _fold1_info(p2_rule, truth)
    if abs(i1_p1 - i1_p2) > 1e-6:
        raise CalibrationError(
            f"rules carry unequal fold-1 information: {i1_p1} vs {i1_p2}; "
            "calibrate before comparing"
        )
    rhs = 1.0 / _fold2_marginal_info(p1_rule, truth)
    lhs = expected_inverse_cond_info(p2_rule, truth, n_mc=n_mc, rng=rng)
    if lhs.infinite:
        return InequalityCheck(
            applicable=True, holds=True, lhs=lhs, rhs=rhs, margin=math.inf,
            reason="left side infinite",
        )
    margin = lhs.value - rhs
    slack = 3.0 * (lhs.mc_se or 0.0)
    return InequalityCheck(
        applicable=True,
        holds=bool(margin >= -slack),
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        reason="" if margin >= -slack else f"margin {margin} below -3*mc_se {-slack}",
    )


def audit_poisson_pair(
    theta: float, eps: float, n_mc: int = 100_000, rng: Optional[np.random.Generator] = None
) -> dict:
    """Full audit of thinning vs the calibrated additive-noise split.

    Returns a JSON-friendly dict with both information ledgers, the
    calibrated tau, and the inequality verdict. Backs the info-audit CLI.
    """
    truth = DistributionSpec.poisson(theta)
    p1 = FissionRule.poisson_thin(eps)
    tau = calibrate_equal_training_info(p1, truth)
    p2 = FissionRule.poisson_tau_p2(tau)
    report_p1 = chain_rule_check(p1, truth, n_mc=n_mc, rng=rng)
    report_p2 = chain_rule_check(p2, truth, n_mc=n_mc, rng=rng)
    verdict = information_inequality_check(p1, p2, truth, n_mc=n_mc, rng=rng)
    return {
        "family": "poisson",
        "theta": theta,
        "eps": eps,
        "tau": tau,
        "p1_report": report_p1.to_dict(),
        "p2_report": report_p2.to_dict(),
        "inequality": verdict.to_dict(),
        "n_mc": n_mc,
    }
