"""Data fission and thinning: split draws, audit information, infer selectively.

The package provides

* distribution specs with exact mass functions and Fisher information
  (:mod:`datafission.distributions`),
* fission operators producing folds with declared laws
  (:mod:`datafission.fission`),
* information-accounting audits of those operators
  (:mod:`datafission.infoaudit`),
* a lasso-path logistic solver and Wald inference (:mod:`datafission.glm`),
* offset-corrected selective inference after fission
  (:mod:`datafission.pipelines`), and
* a replicated simulation harness (:mod:`datafission.harness`).
"""

from .distributions import (
    DistributionSpec,
    Family,
    SupportError,
    TruncationError,
    fisher_info,
    fisher_info_numeric,
    log_mass,
    sample,
)
from .fission import (
    FissionRule,
    FoldPair,
    FoldSet,
    Reconstruction,
    RuleKind,
    conditional_law,
    fission_bernoulli_p2,
    fission_gaussian_misspec_p2,
    fission_gaussian_p1,
    fission_negbin_p1,
    fission_negbin_via_poisson_p2,
    fission_poisson_tau_p2,
    fission_poisson_thin,
    reconstruct,
)
from .infoaudit import (
    CalibrationError,
    InfoReport,
    InverseCondInfo,
    calibrate_equal_training_info,
    chain_rule_check,
    conditional_info_poisson_tau,
    expected_inverse_cond_info,
    information_inequality_check,
)
from .rng import child_rng

__all__ = [
    "DistributionSpec",
    "Family",
    "SupportError",
    "TruncationError",
    "fisher_info",
    "fisher_info_numeric",
    "log_mass",
    "sample",
    "FissionRule",
    "FoldPair",
    "FoldSet",
    "Reconstruction",
    "RuleKind",
    "conditional_law",
    "fission_bernoulli_p2",
    "fission_gaussian_misspec_p2",
    "fission_gaussian_p1",
    "fission_negbin_p1",
    "fission_negbin_via_poisson_p2",
    "fission_poisson_tau_p2",
    "fission_poisson_thin",
    "reconstruct",
    "CalibrationError",
    "InfoReport",
    "InverseCondInfo",
    "calibrate_equal_training_info",
    "chain_rule_check",
    "conditional_info_poisson_tau",
    "expected_inverse_cond_info",
    "information_inequality_check",
    "child_rng",
]

__version__ = "0.1.0"
