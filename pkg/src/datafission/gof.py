"""Goodness-of-fit utilities for checking declared fold laws.

Chi-square tests lump low-mass cells so every bin has expected count >= 5
(the usual validity rule); continuous laws go through Kolmogorov-Smirnov.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .distributions import DistributionSpec, Family, log_mass

__all__ = ["GofResult", "discrete_gof", "discrete_independence", "gaussian_ks"]


@dataclass(frozen=True)
class GofResult:
    statistic: float
    pvalue: float
    df: int


def _cell_probs(spec: DistributionSpec, hi: int) -> np.ndarray:
    """pmf at 0..hi plus the upper-tail mass as a final cell."""
    pmf = np.array([math.exp(log_mass(spec, x)) for x in range(hi + 1)])
    tail = max(0.0, 1.0 - pmf.sum())
    return np.append(pmf, tail)


def _merge_bins(expected: np.ndarray, min_expected: float) -> list[np.ndarray]:
    """Greedy left-to-right merge of adjacent cells until every bin >= min_expected."""
    bins: list[list[int]] = []
    current: list[int] = []
    acc = 0.0
    for idx, e in enumerate(expected):
        current.append(idx)
        acc += e
        if acc >= min_expected:
            bins.append(current)
            current = []
            acc = 0.0
    if current:
        if bins:
            bins[-1].extend(current)
        else:
            bins.append(current)
    return [np.array(b) for b in bins]


def discrete_gof(samples, spec: DistributionSpec, min_expected: float = 5.0) -> GofResult:
    """Chi-square GOF of integer samples against a fully specified count law."""
    x = np.asarray(samples, dtype=np.int64)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    hi = int(x.max())
    probs = _cell_probs(spec, hi)
    expected = n * probs
    groups = _merge_bins(expected, min_expected)
    if len(groups) < 2:
        raise ValueError("support too concentrated to form two bins with the requested expected count")
    counts = np.bincount(x, minlength=hi + 1)
    counts = np.append(counts, 0)  # tail cell: nothing observed above the max
    obs = np.array([counts[g].sum() for g in groups], dtype=float)
    exp = np.array([expected[g].sum() for g in groups])
    stat = float(((obs - exp) ** 2 / exp).sum())
    df = len(groups) - 1
    return GofResult(stat, float(stats.chi2.sf(stat, df)), df)


def _margin_codes(values: np.ndarray, min_count: float) -> np.ndarray:
    """Map integer values to merged-bin codes with each bin's count >= min_count."""
    hi = int(values.max())
    counts = np.bincount(values, minlength=hi + 1).astype(float)
    groups = _merge_bins(counts, min_count)
    codes = np.empty(hi + 1, dtype=np.int64)
    for code, g in enumerate(groups):
        codes[g] = code
    return codes[values]


def discrete_independence(f1, f2, min_expected: float = 5.0) -> GofResult:
    """Chi-square independence test of two integer samples.

    Each margin is binned so that the smallest expected cell count under
    independence is at least ``min_expected``.
    """
    a = np.asarray(f1, dtype=np.int64)
    b = np.asarray(f2, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError("samples must be paired")
    n = a.size
    min_marginal = math.sqrt(min_expected * n)
    ca = _margin_codes(a, min_marginal)
    cb = _margin_codes(b, min_marginal)
    table = np.zeros((ca.max() + 1, cb.max() + 1), dtype=np.int64)
    np.add.at(table, (ca, cb), 1)
    if table.shape[0] < 2 or table.shape[1] < 2:
        raise ValueError("a margin collapsed to a single bin; independence test undefined")
    stat, pvalue, df, _ = stats.chi2_contingency(table, correction=False)
    return GofResult(float(stat), float(pvalue), int(df))


def gaussian_ks(samples, spec: DistributionSpec) -> GofResult:
    """Kolmogorov-Smirnov test against a Gaussian spec."""
    if spec.family is not Family.GAUSSIAN:
        raise ValueError("gaussian_ks requires a Gaussian spec")
    mu, s2 = spec.params
    stat, pvalue = stats.kstest(np.asarray(samples), "norm", args=(mu, math.sqrt(s2)))
    return GofResult(float(stat), float(pvalue), 0)
