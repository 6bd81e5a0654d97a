"""Logistic regression: lasso path with CV selection, IRLS with offsets, Wald.

The lasso solver minimizes (1/n) * negative log-likelihood + lambda * ||b||_1
with an unpenalized intercept, by coordinate descent inside an IRLS
majorization loop, warm-starting along a descending lambda grid. Columns are
standardized internally (population SD); coefficients are reported on the
original scale. lambda_max is computed by the same jitted routine that the
first coordinate-descent sweep uses, so "all slopes zero at lambda_max" holds
exactly in floating point, not just in theory.

The unpenalized fitter is plain Newton/IRLS with an additive offset in the
linear predictor, run until the score's max-norm drops below 1e-8, with both
model-based and Huber-White sandwich covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy.stats import norm

__all__ = [
    "Dataset",
    "LassoPath",
    "SelectionResult",
    "GlmFit",
    "WaldTable",
    "SeparationError",
    "logistic_lasso_path",
    "default_lambda_grid",
    "lambda_max",
    "cv_select",
    "logistic_irls",
    "wald_inference",
]

CD_TOL = 1e-8
CD_MAX_SWEEPS = 100_000
IRLS_REL_TOL = 1e-10
IRLS_MAX_ITER = 100
PROB_CLIP = 1e-8


class SeparationError(RuntimeError):
    """Diverging coefficients without convergence: the classes separate."""


@dataclass
class Dataset:
    """Fixed design, binary response, optional offset; intercept always in."""

    design: np.ndarray
    response: np.ndarray
    offset: Optional[np.ndarray] = None
    intercept: bool = True

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.design, dtype=float))
        if x.ndim != 2:
            raise ValueError("design must be 2-dimensional")
        y = np.asarray(self.response)
        if y.shape != (x.shape[0],):
            raise ValueError("response length must match design rows")
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("response must be binary 0/1")
        if x.shape[0] < 2:
            raise ValueError("need at least two observations")
        if not np.all(np.isfinite(x)):
            raise ValueError("design contains non-finite values")
        if not self.intercept:
            raise ValueError("the intercept is always included")
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "response", y.astype(np.int64))
        if self.offset is not None:
            off = np.asarray(self.offset, dtype=float)
            if off.shape != (x.shape[0],):
                raise ValueError("offset length must match design rows")
            if not np.all(np.isfinite(off)):
                raise ValueError("offset contains non-finite values")
            object.__setattr__(self, "offset", off)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


# -- jitted kernels --------------------------------------------------------


@njit(cache=True)
def _log1pexp(v):
    if v > 35.0:
        return v + math.exp(-v)
    if v < -35.0:
        return math.exp(v)
    return math.log1p(math.exp(v))


@njit(cache=True)
def _deviance(eta, y):
    n = eta.shape[0]
    dev = 0.0
    for i in range(n):
        dev += 2.0 * (_log1pexp(eta[i]) - y[i] * eta[i])
    return dev


@njit(cache=True)
def _null_gradients(x, y, prob_clip):
    """Per-column gradient of the mean NLL at the intercept-only optimum.

    Replicates the path kernel's first quadratic operation-for-operation
    (including the logit/sigmoid round trip and the clip), so that
    lambda_max = max_j |g_j| zeroes every slope at the first path point
    bitwise, not merely in exact arithmetic.
    """
    n, p = x.shape
    ybar = y.mean()
    b0 = math.log(ybar / (1.0 - ybar))
    pr = 1.0 / (1.0 + math.exp(-b0))
    if pr < prob_clip:
        pr = prob_clip
    elif pr > 1.0 - prob_clip:
        pr = 1.0 - prob_clip
    w0 = pr * (1.0 - pr)
    g = np.zeros(p)
    for j in range(p):
        acc = 0.0
        for i in range(n):
            acc += w0 * x[i, j] * ((y[i] - pr) / w0)
        g[j] = acc / n
    return g


@njit(cache=True)
def _cd_sweep(x, w, r, b, b0, wxx, sw, lam, active_only):
    """One coordinate sweep on the weighted quadratic; returns (delta, b0).

    Slopes first, intercept last; at the first path point this leaves the
    working residual untouched until the soft threshold has seen every
    pristine gradient (the lambda_max-zeroing guarantee). With
    ``active_only`` the sweep skips currently-zero slopes.
    """
    n, p = x.shape
    delta = 0.0
    for j in range(p):
        if active_only and b[j] == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += w[i] * x[i, j] * r[i]
        g = g / n + wxx[j] * b[j]
        if g > lam:
            newb = (g - lam) / wxx[j]
        elif g < -lam:
            newb = (g + lam) / wxx[j]
        else:
            newb = 0.0
        d = newb - b[j]
        if d != 0.0:
            b[j] = newb
            for i in range(n):
                r[i] -= x[i, j] * d
            if abs(d) > delta:
                delta = abs(d)
    acc = 0.0
    for i in range(n):
        acc += w[i] * r[i]
    d0 = acc / sw
    if d0 != 0.0:
        b0 += d0
        for i in range(n):
            r[i] -= d0
        if abs(d0) > delta:
            delta = abs(d0)
    return delta, b0


@njit(cache=True)
def _lasso_path_kernel(x, y, lambdas, lmax, cd_tol, max_sweeps, irls_tol, max_irls, prob_clip):
    """Warm-started lasso path on a standardized design.

    Coordinate descent inside each IRLS quadratic alternates full sweeps
    (which admit new active coordinates) with cheap active-set sweeps;
    convergence requires a full sweep whose largest update is below tol.
    Points with lam >= lmax emit the null model directly: there the
    intercept-only fit satisfies the KKT conditions exactly, so no descent
    is needed (and no rounding can smuggle in a nonzero slope).
    """
    n, p = x.shape
    nl = lambdas.shape[0]
    ybar = y.mean()
    b0 = math.log(ybar / (1.0 - ybar))
    b = np.zeros(p)
    out0 = np.empty(nl)
    outb = np.empty((nl, p))
    converged = np.zeros(nl, np.bool_)
    sweeps_used = np.zeros(nl, np.int64)

    eta = np.empty(n)
    w = np.empty(n)
    r = np.empty(n)
    z = np.empty(n)
    wxx = np.empty(p)

    # invariant: eta holds the current linear predictor; the warm start
    # carries it across lambdas, and each quadratic restores it as z - r.
    for i in range(n):
        eta[i] = b0

    for li in range(nl):
        lam = lambdas[li]
        if lam >= lmax:
            # grid is descending, so the warm state is still the null model
            out0[li] = b0
            for j in range(p):
                outb[li, j] = b[j]
            converged[li] = True
            sweeps_used[li] = 0
            continue
        total_sweeps = 0
        dev_old = 1e300
        ok = False
        for _ in range(max_irls):
            # quadratic approximation at the current point
            for i in range(n):
                pr = 1.0 / (1.0 + math.exp(-eta[i]))
                if pr < prob_clip:
                    pr = prob_clip
                elif pr > 1.0 - prob_clip:
                    pr = 1.0 - prob_clip
                w[i] = pr * (1.0 - pr)
                r[i] = (y[i] - pr) / w[i]  # z - eta
                z[i] = eta[i] + r[i]
            sw = 0.0
            for i in range(n):
                sw += w[i]
            for j in range(p):
                acc = 0.0
                for i in range(n):
                    acc += w[i] * x[i, j] * x[i, j]
                wxx[j] = acc / n

            cd_ok = False
            while total_sweeps < max_sweeps:
                total_sweeps += 1
                delta, b0 = _cd_sweep(x, w, r, b, b0, wxx, sw, lam, False)
                if delta < cd_tol:
                    cd_ok = True
                    break
                while total_sweeps < max_sweeps:
                    total_sweeps += 1
                    delta, b0 = _cd_sweep(x, w, r, b, b0, wxx, sw, lam, True)
                    if delta < cd_tol:
                        break

            for i in range(n):
                eta[i] = z[i] - r[i]
            dev = _deviance(eta, y)
            if cd_ok and abs(dev - dev_old) < irls_tol * (abs(dev) + 0.1):
                ok = True
                break
            dev_old = dev
        out0[li] = b0
        for j in range(p):
            outb[li, j] = b[j]
        converged[li] = ok
        sweeps_used[li] = total_sweeps
    return out0, outb, converged, sweeps_used


# -- path API --------------------------------------------------------------


def _standardize(x: np.ndarray):
    means = x.mean(axis=0)
    sds = x.std(axis=0)  # population SD
    if np.any(sds < 1e-12):
        raise ValueError("constant design column: collinear with the intercept")
    return np.ascontiguousarray((x - means) / sds), means, sds


@dataclass
class LassoPath:
    """Original-scale coefficients at each lambda, plus the scaling used."""

    lambdas: np.ndarray
    coef0: np.ndarray  # (L,)
    coefs: np.ndarray  # (L, p)
    converged: np.ndarray
    sweeps: np.ndarray
    col_means: np.ndarray
    col_sds: np.ndarray

    def std_coefs(self) -> np.ndarray:
        """Coefficients on the standardized scale (for KKT checks)."""
        return self.coefs * self.col_sds

    def active_sets(self) -> list:
        return [tuple(int(j) + 1 for j in np.flatnonzero(row)) for row in self.coefs]


def lambda_max(data: Dataset) -> float:
    """Smallest penalty at which every slope is zero, on standardized columns."""
    xs, _, _ = _standardize(data.design)
    y = data.response.astype(float)
    if not (0.0 < y.mean() < 1.0):
        raise ValueError("response is single-class; logistic fit undefined")
    return float(np.max(np.abs(_null_gradients(xs, y, PROB_CLIP))))


def default_lambda_grid(data: Dataset, n_points: int = 100, ratio: float = 0.01) -> np.ndarray:
    """Log-spaced descending grid from lambda_max down to ratio*lambda_max."""
    lmax = lambda_max(data)
    return lmax * np.logspace(0.0, math.log10(ratio), n_points)


def logistic_lasso_path(data: Dataset, lambda_grid: Optional[np.ndarray] = None) -> LassoPath:
    """Fit the penalized path over a descending grid with warm starts."""
    if data.offset is not None:
        raise ValueError("the penalized path does not support offsets")
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(data)
    lambdas = np.asarray(lambda_grid, dtype=float)
    if lambdas.ndim != 1 or len(lambdas) == 0:
        raise ValueError("lambda grid must be a nonempty 1-d array")
    if np.any(lambdas < 0) or np.any(np.diff(lambdas) > 0):
        raise ValueError("lambda grid must be nonnegative and descending")
    xs, means, sds = _standardize(data.design)
    y = data.response.astype(float)
    if not (0.0 < y.mean() < 1.0):
        raise ValueError("response is single-class; logistic fit undefined")
    lmax = float(np.max(np.abs(_null_gradients(xs, y, PROB_CLIP))))
    b0s, bs, conv, sweeps = _lasso_path_kernel(
        xs, y, lambdas, lmax, CD_TOL, CD_MAX_SWEEPS, IRLS_REL_TOL, IRLS_MAX_ITER, PROB_CLIP
    )
    coefs = bs / sds
    coef0 = b0s - coefs @ means
    return LassoPath(
        lambdas=lambdas,
        coef0=coef0,
        coefs=coefs,
        converged=conv,
        sweeps=sweeps,
        col_means=means,
        col_sds=sds,
    )


# -- cross-validated selection ---------------------------------------------


@dataclass
class SelectionResult:
    """Selected support (1-based column indices) and the CV evidence."""

    selected: tuple
    lambda_chosen: float
    cv_curve: np.ndarray  # (L, 3): lambda, mean deviance, se
    rule: str
    chosen_index: int

    def __post_init__(self) -> None:
        if 0 in self.selected:
            raise ValueError("selected indices are 1-based; 0 would be the intercept")


def _stratified_folds(y: np.ndarray, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold labels preserving class balance: shuffle within class, deal out."""
    assign = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = rng.permutation(idx)
        assign[idx] = np.arange(len(idx)) % n_folds
    return assign


def cv_select(
    data: Dataset,
    rng: np.random.Generator,
    n_folds: int = 10,
    lambda_grid: Optional[np.ndarray] = None,
    rule: str = "min",
) -> SelectionResult:
    """Select the support by K-fold CV on binomial deviance.

    ``rule="min"`` takes the deviance-minimizing lambda; ``rule="1se"`` takes
    the largest lambda within one standard error of that minimum. Ties break
    toward larger lambda. Folds are stratified; a fold assignment leaving any
    training set single-class is redrawn once, then refused.
    """
    if rule not in ("min", "1se"):
        raise ValueError(f"rule must be 'min' or '1se', got {rule!r}")
    if not (3 <= n_folds <= data.n):
        raise ValueError("n_folds must lie between 3 and n")
    if data.offset is not None:
        raise ValueError("selection does not support offsets")
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(data)
    lambdas = np.asarray(lambda_grid, dtype=float)
    y = data.response

    def _single_class_training(a: np.ndarray) -> bool:
        return any(len(np.unique(y[a != k])) < 2 for k in range(n_folds))

    assign = _stratified_folds(y, n_folds, rng)
    if _single_class_training(assign):
        assign = _stratified_folds(y, n_folds, rng)  # one redraw, then give up
        if _single_class_training(assign):
            raise ValueError("could not build folds with two-class training sets")

    fold_dev = np.empty((n_folds, len(lambdas)))
    for k in range(n_folds):
        train = assign != k
        test = ~train
        sub = Dataset(design=data.design[train], response=y[train])
        path = logistic_lasso_path(sub, lambdas)
        eta = path.coef0[:, None] + path.coefs @ data.design[test].T  # (L, n_test)
        yt = y[test].astype(float)
        dev = 2.0 * (np.logaddexp(0.0, eta) - yt[None, :] * eta)
        fold_dev[k] = dev.mean(axis=1)

    mean_dev = fold_dev.mean(axis=0)
    se_dev = fold_dev.std(axis=0, ddof=1) / math.sqrt(n_folds)

    min_idx = int(np.argmin(mean_dev))  # first minimum = largest lambda on ties
    if rule == "min":
        chosen = min_idx
    else:
        threshold = mean_dev[min_idx] + se_dev[min_idx]
        chosen = int(np.flatnonzero(mean_dev <= threshold)[0])

    full_path = logistic_lasso_path(data, lambdas)
    selected = tuple(int(j) + 1 for j in np.flatnonzero(full_path.coefs[chosen]))
    return SelectionResult(
        selected=selected,
        lambda_chosen=float(lambdas[chosen]),
        cv_curve=np.column_stack([lambdas, mean_dev, se_dev]),
        rule=rule,
        chosen_index=chosen,
    )


# -- unpenalized IRLS ------------------------------------------------------


@dataclass
class GlmFit:
    """MLE with model-based and sandwich covariance.

    ``coef[0]`` is the intercept; the rest follow the design columns passed
    to the fit. Covariances are symmetric PSD within 1e-8.
    """

    coef: np.ndarray
    cov_model: np.ndarray
    cov_sandwich: np.ndarray
    converged: bool
    iterations: int
    offset_used: bool

    def __post_init__(self) -> None:
        for name in ("cov_model", "cov_sandwich"):
            m = getattr(self, name)
            if not np.allclose(m, m.T, atol=1e-8, equal_nan=True):
                raise ValueError(f"{name} is not symmetric")
            # NaN covariances mark a fit that never converged; nothing to check
            if len(m) and np.all(np.isfinite(m)):
                if np.linalg.eigvalsh((m + m.T) / 2.0).min() < -1e-8:
                    raise ValueError(f"{name} is not positive semidefinite")
        if self.converged and not np.all(np.isfinite(self.coef)):
            raise ValueError("converged fit must have finite coefficients")


def logistic_irls(data: Dataset) -> GlmFit:
    """Newton/IRLS logistic MLE with an optional additive offset.

    Iterates until the score max-norm is below 1e-8. Diverging coefficients
    (max |beta| > 30) without convergence raise :class:`SeparationError`;
    rank-deficient designs raise ``ValueError``.
    """
    n = data.n
    xfull = np.column_stack([np.ones(n), data.design])
    q = xfull.shape[1]
    if np.linalg.matrix_rank(xfull) < q:
        raise ValueError("design (with intercept) is rank deficient")
    off = data.offset if data.offset is not None else np.zeros(n)
    y = data.response.astype(float)

    beta = np.zeros(q)
    converged = False
    it = 0
    for it in range(1, IRLS_MAX_ITER + 1):
        eta = xfull @ beta + off
        p = 1.0 / (1.0 + np.exp(-eta))
        score = xfull.T @ (y - p)
        if np.max(np.abs(score)) < 1e-8:
            converged = True
            break
        w = np.clip(p * (1.0 - p), 1e-12, None)
        xw = xfull * w[:, None]
        hess = xfull.T @ xw
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular information matrix during IRLS") from exc
        beta = beta + step
        if np.max(np.abs(beta)) > 30.0:
            raise SeparationError(
                "coefficients diverging (max |beta| > 30) without convergence; "
                "the classes are (quasi-)separated"
            )
    if not converged:
        if np.max(np.abs(beta)) > 30.0:
            raise SeparationError("IRLS did not converge and coefficients diverged")
        return GlmFit(
            coef=beta,
            cov_model=np.full((q, q), np.nan),
            cov_sandwich=np.full((q, q), np.nan),
            converged=False,
            iterations=it,
            offset_used=data.offset is not None,
        )

    eta = xfull @ beta + off
    p = 1.0 / (1.0 + np.exp(-eta))
    w = p * (1.0 - p)
    info = xfull.T @ (xfull * w[:, None])
    bread = np.linalg.inv(info)
    resid_sq = (y - p) ** 2
    meat = xfull.T @ (xfull * resid_sq[:, None])
    sandwich = bread @ meat @ bread
    return GlmFit(
        coef=beta,
        cov_model=(bread + bread.T) / 2.0,
        cov_sandwich=(sandwich + sandwich.T) / 2.0,
        converged=True,
        iterations=it,
        offset_used=data.offset is not None,
    )


# -- Wald inference --------------------------------------------------------


@dataclass
class WaldTable:
    """Per-coefficient estimates, CIs, and two-sided normal p-values."""

    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    pvalue: np.ndarray
    level: float
    cov_used: str


def wald_inference(fit: GlmFit, level: float = 0.95, cov: str = "model") -> WaldTable:
    """CIs beta +/- z * SE and p-values from the standard normal."""
    if not fit.converged:
        raise ValueError("refusing Wald inference on a non-converged fit")
    if cov not in ("model", "sandwich"):
        raise ValueError("cov must be 'model' or 'sandwich'")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    vc = fit.cov_model if cov == "model" else fit.cov_sandwich
    se = np.sqrt(np.diag(vc))
    z = norm.ppf(1.0 - (1.0 - level) / 2.0)
    est = fit.coef
    with np.errstate(divide="ignore", invalid="ignore"):
        zstat = np.where(se > 0, est / se, np.where(est == 0, 0.0, np.inf))
    pval = 2.0 * norm.sf(np.abs(zstat))
    return WaldTable(
        estimate=est.copy(),
        se=se,
        lower=est - z * se,
        upper=est + z * se,
        pvalue=pval,
        level=level,
        cov_used=cov,
    )
