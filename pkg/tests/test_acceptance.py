"""Acceptance gate: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
happen. The two replicated studies (global null, signal) are module fixtures;
everything else is quick. Criterion 3 compares a desk-scale rerun against
reference aggregates whose exact selection behavior depends on
tuning defaults the reference does not state; the bands that miss are printed
individually and the test fails honestly rather than being loosened.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import expit, logit

from datafission import distributions as dist
from datafission.distributions import DistributionSpec
from datafission.fission import (
    FissionRule,
    conditional_law,
    fission_bernoulli_p2,
    fission_gaussian_misspec_p2,
    fission_gaussian_p1,
    fission_negbin_p1,
    fission_negbin_via_poisson_p2,
    fission_poisson_tau_p2,
    fission_poisson_thin,
    misspec_gaussian_joint_moments,
    reconstruct,
)
from datafission.glm import (
    Dataset,
    default_lambda_grid,
    lambda_max,
    logistic_irls,
    logistic_lasso_path,
)
from datafission.gof import discrete_gof, discrete_independence, gaussian_ks
from datafission.harness import (
    SimConfig,
    coefficient_table,
    pvalue_uniformity_ks,
    run_study,
)
from datafission.infoaudit import chain_rule_check, expected_inverse_cond_info
from datafission.rng import child_rng

SEED = 20260822
CV_RULE = "1se"  # acceptance pin; the library default stays "min"


def _line(num, slug, ok, detail):
    print(f"criterion {num} ({slug}): {'PASS' if ok else 'FAIL'} - {detail}", flush=True)


@pytest.fixture(scope="module")
def null_study():
    config = SimConfig(
        n=500,
        p=50,
        beta0=0.6,
        beta=(0.0,) * 50,
        eps=0.8,
        n_reps=300,
        method="both",
        seed=SEED,
        cv_rule=CV_RULE,
        threads=4,
    )
    t0 = time.perf_counter()
    report = run_study(config)
    return report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def signal_study():
    config = SimConfig(
        n=500,
        p=50,
        beta0=0.6,
        beta=(-0.9, 2.1, -1.5) + (0.0,) * 47,
        eps=0.8,
        n_reps=300,
        method="corrected",
        seed=SEED,
        cv_rule=CV_RULE,
        threads=4,
    )
    return run_study(config)


def test_criterion_1_corrected_null_pvalues_are_uniform(null_study):
    report, elapsed = null_study
    _, pv = pvalue_uniformity_ks(report, "corrected")
    ok = pv > 0.01 and elapsed <= 600.0
    _line(1, "corrected-null-uniformity", ok, f"KS p {pv:.4f} > 0.01; study took {elapsed:.0f}s <= 600s")
    assert pv > 0.01
    assert elapsed <= 600.0


def test_criterion_2_flawed_null_pvalues_are_not_uniform(null_study):
    report, _ = null_study
    _, pv = pvalue_uniformity_ks(report, "flawed")
    ok = pv < 0.01
    _line(2, "flawed-null-nonuniformity", ok, f"KS p {pv:.3g} < 0.01")
    assert pv < 0.01


def test_criterion_3_signal_aggregates_within_reference_bands(signal_study):
    table = coefficient_table(signal_study)
    ref_selection = {1: 0.32, 2: 0.94, 3: 0.74}
    ref_power = {1: 0.88, 2: 1.00, 3: 0.99}
    checks = []
    for j in (1, 2, 3):
        row = table.rows[j]
        cov, sel, pw = row["coverage"], row["selection_prop"], row["rejection_prop"]
        checks.append((f"coverage j={j}", 0.91 <= cov <= 0.99, f"{cov:.4f} vs [0.91, 0.99]"))
        lo, hi = ref_selection[j] - 0.12, ref_selection[j] + 0.12
        checks.append((f"selection j={j}", lo <= sel <= hi, f"{sel:.4f} vs [{lo:.2f}, {hi:.2f}]"))
        lo, hi = ref_power[j] - 0.08, ref_power[j] + 0.08
        checks.append((f"power j={j}", lo <= pw <= hi, f"{pw:.4f} vs [{lo:.2f}, {hi:.2f}]"))
    null = table.null_row
    nsel, nrej = null["selection_prop"], null["rejection_prop"]
    checks.append(("null selection", abs(nsel - 0.02) <= 0.02, f"{nsel:.4f} vs 0.02 +/- 0.02"))
    checks.append(("null rejection", abs(nrej - 0.05) <= 0.04, f"{nrej:.4f} vs 0.05 +/- 0.04"))
    for label, ok, detail in checks:
        print(f"    {label}: {'ok' if ok else 'out of band'} ({detail})", flush=True)
    bad = [f"{label} ({detail})" for label, ok, detail in checks if not ok]
    _line(3, "signal-reference-bands", not bad, f"{len(checks) - len(bad)} of {len(checks)} bands in range")
    assert not bad, (
        "aggregates outside the reference bands: " + "; ".join(bad) + ". "
        "The reference run does not pin its selection tuning; under every rule "
        "tried here the weak-signal variable is selected far more often than "
        "the reference reports, which shifts its conditional power and drags "
        "the mid-signal coverage. See the decisions ledger for the analysis."
    )


def test_criterion_4_infinite_inverse_test_information():
    # independent split: inverse fold-2 information is theta/(1-eps) exactly
    thin = expected_inverse_cond_info(FissionRule.poisson_thin(0.5), DistributionSpec.poisson(2.0))
    ok1 = (not thin.infinite) and abs(thin.value - 4.0) <= 1e-12
    # calibrated dependent split: infinite, certified by the zero-information
    # support point at fold1 = 0 whose exact mass is e^(-(theta+tau))
    dep = expected_inverse_cond_info(FissionRule.poisson_tau_p2(2.0), DistributionSpec.poisson(2.0))
    mass_err = abs(dep.offending_mass - math.exp(-4.0))
    ok2 = dep.infinite and dep.offending_point == 0 and mass_err <= 1e-12
    _line(4, "infinite-inverse-information", ok1 and ok2,
          f"thinning inverse {thin.value} == 4.0; additive-noise infinite with mass error {mass_err:.2e}")
    assert ok1 and ok2


def test_criterion_5_information_chain_rule():
    truth = DistributionSpec.poisson(2.0)
    p1 = chain_rule_check(FissionRule.poisson_thin(0.5), truth)
    ok1 = p1.i_x == 0.5 and p1.chain_gap == 0.0
    p2 = chain_rule_check(
        FissionRule.poisson_tau_p2(2.0), truth, n_mc=100_000, rng=child_rng(SEED, 5)
    )
    slack = 3.0 * p2.mc_se["e_cond_info"]
    gap = p2.i_fold1 + p2.e_cond_info - 0.5
    ok2 = abs(gap) <= slack
    _line(5, "information-chain-rule", ok1 and ok2,
          f"independent split closes exactly; dependent split gap {gap:.2e} within 3 MC SEs ({slack:.2e})")
    assert ok1 and ok2


def test_criterion_6_misspecified_split_covariance():
    rng = child_rng(SEED, 6)
    n = 100_000
    x = rng.normal(0.0, 1.0, n)
    pair = fission_gaussian_misspec_p2(x, 4.0, 0.5, rng)
    _, cov = misspec_gaussian_joint_moments(0.5, 1.0, 4.0)
    c = float(np.cov(pair.fold1, pair.fold2, ddof=1)[0, 1])
    se = math.sqrt((cov[0, 0] * cov[1, 1] + cov[0, 1] ** 2) / n)
    ok1 = abs(c - (-0.75)) <= 4.0 * se
    x2 = rng.normal(0.0, 1.0, n)
    matched = fission_gaussian_misspec_p2(x2, 1.0, 0.5, rng)
    corr = float(np.corrcoef(matched.fold1, matched.fold2)[0, 1])
    ok2 = abs(corr) < 0.015
    _line(6, "misspecified-split-covariance", ok1 and ok2,
          f"overstated variance cov {c:.4f} within 4 SE of -0.75; matched variance |corr| {abs(corr):.4f} < 0.015")
    assert ok1 and ok2


def test_criterion_7_rule_fidelity():
    n_recon, n_gof = 10_000, 100_000
    details = []
    ok_all = True

    def check(name, ok):
        nonlocal ok_all
        ok_all = ok_all and ok
        details.append(f"{name}:{'ok' if ok else 'BAD'}")

    # gaussian independent split
    rng = child_rng(SEED, 7, 0)
    x = rng.normal(1.0, math.sqrt(2.0), n_gof)
    pair = fission_gaussian_p1(x[:n_recon], 2.0, 0.3, rng)
    check("gaussian-p1", np.allclose(reconstruct(pair), x[:n_recon], rtol=0.0, atol=1e-10))
    pair = fission_gaussian_p1(x, 2.0, 0.3, rng)
    check("gaussian-p1-marginal", gaussian_ks(pair.fold1, pair.fold1_law(theta=1.0)).pvalue > 0.01)
    check("gaussian-p1-indep", abs(np.corrcoef(pair.fold1, pair.fold2)[0, 1]) < 0.015)

    # gaussian misspecified split (its conditional is deliberately undeclared;
    # the joint second moments are covered by criterion 6)
    rng = child_rng(SEED, 7, 1)
    x = rng.normal(0.0, 1.0, n_gof)
    pair = fission_gaussian_misspec_p2(x[:n_recon], 4.0, 0.5, rng)
    check("gaussian-misspec-p2", np.allclose(reconstruct(pair), x[:n_recon], rtol=0.0, atol=1e-10))
    pair = fission_gaussian_misspec_p2(x, 4.0, 0.5, rng)
    check("gaussian-misspec-p2-marginal",
          gaussian_ks(pair.fold1, pair.fold1_law(mu=0.0, sigma_sq=1.0)).pvalue > 0.01)

    # poisson thinning
    rng = child_rng(SEED, 7, 2)
    x = rng.poisson(5.0, n_gof)
    fs = fission_poisson_thin(x[:n_recon], 0.3, rng)
    check("poisson-thin-p1", np.array_equal(reconstruct(fs), x[:n_recon]))
    fs = fission_poisson_thin(x, 0.3, rng)
    check("poisson-thin-p1-marginal", discrete_gof(fs.fold(0), fs.fold_law(0, theta=5.0)).pvalue > 0.01)
    check("poisson-thin-p1-indep", discrete_independence(fs.fold(0), fs.fold(1)).pvalue > 0.01)

    # poisson additive noise
    rng = child_rng(SEED, 7, 3)
    x = rng.poisson(2.0, n_gof)
    pair = fission_poisson_tau_p2(x[:n_recon], 1.0, rng)
    check("poisson-tau-p2", np.array_equal(reconstruct(pair), x[:n_recon]))
    pair = fission_poisson_tau_p2(x, 1.0, rng)
    check("poisson-tau-p2-marginal", discrete_gof(pair.fold1, pair.fold1_law(theta=2.0)).pvalue > 0.01)
    sub = pair.fold2[pair.fold1 == 3]
    check("poisson-tau-p2-conditional",
          discrete_gof(sub, conditional_law(pair, 3, theta=2.0)).pvalue > 0.01)

    # negative binomial beta-binomial split
    rng = child_rng(SEED, 7, 4)
    x = rng.negative_binomial(4.0, 0.5, n_gof)
    pair = fission_negbin_p1(x[:n_recon], 4.0, 0.5, rng)
    check("negbin-p1", np.array_equal(reconstruct(pair), x[:n_recon]))
    pair = fission_negbin_p1(x, 4.0, 0.5, rng)
    check("negbin-p1-marginal", discrete_gof(pair.fold1, pair.fold1_law(theta=0.5)).pvalue > 0.01)
    check("negbin-p1-indep", discrete_independence(pair.fold1, pair.fold2).pvalue > 0.01)

    # negative binomial binomial-thinning split (dependent)
    rng = child_rng(SEED, 7, 5)
    x = rng.negative_binomial(3.0, 0.4, n_gof)
    pair = fission_negbin_via_poisson_p2(x[:n_recon], 0.5, rng)
    check("negbin-via-poisson-p2", np.array_equal(reconstruct(pair), x[:n_recon]))
    pair = fission_negbin_via_poisson_p2(x, 0.5, rng)
    check("negbin-via-poisson-p2-marginal",
          discrete_gof(pair.fold1, pair.fold1_law(r=3.0, theta=0.4)).pvalue > 0.01)
    sub = pair.fold2[pair.fold1 == 2]
    check("negbin-via-poisson-p2-conditional",
          discrete_gof(sub, conditional_law(pair, 2, r=3.0, theta=0.4)).pvalue > 0.01)

    # response-bit flipping
    rng = child_rng(SEED, 7, 6)
    y = rng.binomial(1, 0.6, n_gof)
    pair = fission_bernoulli_p2(y[:n_recon], 0.8, rng)
    check("bernoulli-p2", np.array_equal(reconstruct(pair), y[:n_recon]))
    pair = fission_bernoulli_p2(y, 0.8, rng)
    check("bernoulli-p2-marginal", discrete_gof(pair.fold1, pair.fold1_law(theta=0.6)).pvalue > 0.01)
    for v in (0, 1):
        sub = pair.fold2[pair.fold1 == v]
        p = conditional_law(pair, v, theta=0.6).theta
        check(f"bernoulli-p2-conditional-{v}",
              abs(sub.mean() - p) < 4.0 * math.sqrt(p * (1 - p) / len(sub)))

    _line(7, "rule-fidelity", ok_all, "; ".join(details))
    assert ok_all, details


def test_criterion_8_optimizer_quality():
    rng = child_rng(SEED, 8)
    x = rng.standard_normal((200, 8))
    beta = np.r_[1.2, -0.8, 0.5, np.zeros(5)]
    y = rng.binomial(1, expit(x @ beta))
    data = Dataset(x, y)

    # KKT residuals along the path
    path = logistic_lasso_path(data, default_lambda_grid(data, n_points=10))
    xs = (data.design - path.col_means) / path.col_sds
    yf = data.response.astype(float)
    kkt = 0.0
    for i, lam in enumerate(path.lambdas):
        b = path.std_coefs()[i]
        b0 = path.coef0[i] + float(path.col_means @ path.coefs[i])
        g = xs.T @ (expit(b0 + xs @ b) - yf) / data.n
        active = b != 0.0
        kkt = max(kkt, float(np.max(np.abs(g[active] + lam * np.sign(b[active])), initial=0.0)))
        kkt = max(kkt, float(np.max(np.abs(g[~active]) - lam, initial=0.0)))
    ok_kkt = kkt <= 1e-6

    # IRLS exit: score max-norm below 1e-8
    fit = logistic_irls(data)
    xf = np.column_stack([np.ones(data.n), data.design])
    score = float(np.max(np.abs(xf.T @ (yf - expit(xf @ fit.coef)))))
    ok_irls = fit.converged and score < 1e-8

    # analytic gradient against central differences
    point = np.full(8, 0.1)

    def nll(b):
        eta = xs @ b
        return float(np.mean(np.logaddexp(0.0, eta) - yf * eta))

    grad = xs.T @ (expit(xs @ point) - yf) / data.n
    h = 1e-5
    fd = np.array([
        (nll(point + h * e) - nll(point - h * e)) / (2 * h) for e in np.eye(8)
    ])
    rel = float(np.linalg.norm(grad - fd) / np.linalg.norm(grad))
    ok_grad = rel <= 1e-6

    # lambda_max zeroes every slope bitwise
    at_knee = logistic_lasso_path(data, np.array([lambda_max(data)]))
    ok_knee = bool(np.all(at_knee.coefs == 0.0))

    # intercept-only MLE is the logit of the sample mean
    only = logistic_irls(Dataset(np.empty((data.n, 0)), data.response))
    ok_mle = abs(only.coef[0] - logit(yf.mean())) <= 1e-10

    ok = ok_kkt and ok_irls and ok_grad and ok_knee and ok_mle
    _line(8, "optimizer-quality", ok,
          f"KKT {kkt:.2e} <= 1e-6; IRLS score {score:.2e} < 1e-8; grad rel err {rel:.2e} <= 1e-6; "
          f"knee zeroing {'exact' if ok_knee else 'BROKEN'}; intercept MLE err {abs(only.coef[0] - logit(yf.mean())):.2e} <= 1e-10")
    assert ok
