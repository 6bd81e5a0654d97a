"""Seeded replication harness for the selective-inference pipelines.

Each replicate draws a fresh iid standard-normal design, draws the binary
response from the logistic model, runs the requested pipeline(s), and records
selection plus per-coefficient inference. Replicate ``rep`` consumes only the
child stream derived from ``(seed, rep)``, so results are identical whatever
the worker count or scheduling; aggregation is a deterministic reduce.

Outputs: one CSV of per-replicate records (full-precision, round-trips
exactly), one JSON of aggregates with Monte-Carlo SEs, and one two-column CSV
of QQ pairs per method. Loading a report back recomputes the aggregates from
the records and refuses silently drifted files.

Replicate-level failures are recorded and skipped up to a budget of 1% of
replicates; beyond that the study aborts, on the theory that frequent
failures are a bug, not bad luck.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import kstest

from .glm import Dataset
from .pipelines import (
    Method,
    run_both_pipelines,
    run_corrected_pipeline,
    run_flawed_pipeline,
)
from .rng import child_rng

__all__ = [
    "SimConfig",
    "ReplicateRecord",
    "SimReport",
    "CoefficientTable",
    "run_study",
    "pooled_pvalues",
    "qq_data",
    "coefficient_table",
    "pvalue_uniformity_ks",
    "write_report",
    "load_report",
]

ERROR_BUDGET = 0.01

METHOD_NAMES = {"flawed": Method.FLAWED_MARGINAL, "corrected": Method.CORRECTED_OFFSET}


@dataclass(frozen=True)
class SimConfig:
    """Scenario and execution parameters for one study."""

    n: int = 500
    p: int = 50
    beta0: float = 0.6
    beta: tuple = ()
    eps: float = 0.8
    n_reps: int = 300
    method: str = "both"  # flawed | corrected | both
    seed: int = 0
    design: str = "std-normal"
    n_folds: int = 10
    cv_rule: str = "min"
    n_lambda: int = 100
    lambda_min_ratio: float = 0.01
    level: float = 0.95
    alpha: float = 0.05
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        beta = tuple(float(v) for v in self.beta)
        if len(beta) != self.p:
            raise ValueError(f"beta must have length p={self.p}, got {len(beta)}")
        object.__setattr__(self, "beta", beta)
        if self.method not in ("flawed", "corrected", "both"):
            raise ValueError("method must be 'flawed', 'corrected', or 'both'")
        if self.design != "std-normal":
            raise ValueError("only the std-normal design is implemented")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def methods(self) -> tuple:
        return ("flawed", "corrected") if self.method == "both" else (self.method,)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SimConfig":
        d = dict(d)
        d["beta"] = tuple(d["beta"])
        return SimConfig(**d)


@dataclass
class ReplicateRecord:
    """One pipeline run: the selected set and the per-coefficient inference.

    ``coef_indices`` starts with 0 (the intercept) followed by the selected
    1-based design columns; the inference tuples are parallel to it. An
    errored replicate carries the message in ``error`` and empty tuples.
    """

    rep: int
    method: str
    selected: tuple = ()
    coef_indices: tuple = ()
    estimate: tuple = ()
    se: tuple = ()
    lower: tuple = ()
    upper: tuple = ()
    pvalue: tuple = ()
    intercept_only: bool = False
    error: Optional[str] = None


@dataclass
class SimReport:
    config: SimConfig
    records: list = field(default_factory=list)

    def method_records(self, method: str) -> list:
        """Successful records for one method, in replicate order."""
        if method not in self.config.methods:
            raise ValueError(f"method {method!r} not present in this study")
        return [r for r in self.records if r.method == method and r.error is None]

    @property
    def n_errors(self) -> int:
        return len({r.rep for r in self.records if r.error is not None})


def _pipeline_kwargs(config: SimConfig) -> dict:
    return {
        "n_folds": config.n_folds,
        "rule": config.cv_rule,
        "grid_points": config.n_lambda,
        "grid_ratio": config.lambda_min_ratio,
        "level": config.level,
    }


def _record_from_result(rep: int, method: str, result) -> ReplicateRecord:
    t = result.inference
    return ReplicateRecord(
        rep=rep,
        method=method,
        selected=result.selected.selected,
        coef_indices=result.coef_indices,
        estimate=tuple(float(v) for v in t.estimate),
        se=tuple(float(v) for v in t.se),
        lower=tuple(float(v) for v in t.lower),
        upper=tuple(float(v) for v in t.upper),
        pvalue=tuple(float(v) for v in t.pvalue),
        intercept_only=result.intercept_only,
    )


def _run_replicate(config: SimConfig, rep: int) -> list:
    """Draw the data and run the pipeline(s) on the (seed, rep) child stream."""
    rng = child_rng(config.seed, rep)
    x = rng.standard_normal((config.n, config.p))
    eta = config.beta0 + x @ np.asarray(config.beta)
    y = rng.binomial(1, expit(eta))
    data = Dataset(design=x, response=y)
    kwargs = _pipeline_kwargs(config)
    try:
        if config.method == "both":
            results = run_both_pipelines(data, config.eps, rng, **kwargs)
            return [
                _record_from_result(rep, "flawed", results[Method.FLAWED_MARGINAL]),
                _record_from_result(rep, "corrected", results[Method.CORRECTED_OFFSET]),
            ]
        runner = run_flawed_pipeline if config.method == "flawed" else run_corrected_pipeline
        result = runner(data, config.eps, rng, **kwargs)
        return [_record_from_result(rep, config.method, result)]
    except Exception as exc:  # recorded, budgeted, surfaced in aggregate
        return [
            ReplicateRecord(rep=rep, method=m, error=f"{type(exc).__name__}: {exc}")
            for m in config.methods
        ]


def run_study(config: SimConfig) -> SimReport:
    """Run all replicates (optionally in worker processes) and collect records."""
    reps = list(range(config.n_reps))
    if config.threads > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(config.threads) as pool:
            grouped = pool.starmap(
                _run_replicate, [(config, r) for r in reps], chunksize=max(1, len(reps) // (4 * config.threads))
            )
    else:
        grouped = [_run_replicate(config, r) for r in reps]
    records = [rec for group in grouped for rec in group]
    records.sort(key=lambda r: (r.rep, r.method))
    report = SimReport(config=config, records=records)
    if report.n_errors > ERROR_BUDGET * config.n_reps:
        msgs = {r.error for r in records if r.error is not None}
        raise RuntimeError(
            f"{report.n_errors} of {config.n_reps} replicates failed "
            f"(budget {ERROR_BUDGET:.0%}); sample errors: {sorted(msgs)[:3]}"
        )
    return report


# -- aggregation -----------------------------------------------------------


def _resolve_method(report: SimReport, method: Optional[str]) -> str:
    if method is None:
        if len(report.config.methods) != 1:
            raise ValueError("report holds both methods; specify one")
        return report.config.methods[0]
    return method


def pooled_pvalues(report: SimReport, method: Optional[str] = None) -> np.ndarray:
    """Selected-variable p-values across replicates (intercepts excluded)."""
    method = _resolve_method(report, method)
    pool = []
    for rec in report.method_records(method):
        if rec.intercept_only:
            continue
        for idx, pv in zip(rec.coef_indices, rec.pvalue):
            if idx > 0:
                pool.append(pv)
    return np.asarray(pool, dtype=float)


def qq_data(report: SimReport, method: Optional[str] = None):
    """Uniform plotting positions (k - 0.5)/m paired with sorted p-values."""
    pool = pooled_pvalues(report, method)
    if len(pool) == 0:
        raise ValueError("no pooled p-values: every replicate had empty selection")
    empirical = np.sort(pool)
    m = len(pool)
    theoretical = (np.arange(1, m + 1) - 0.5) / m
    return theoretical, empirical


def pvalue_uniformity_ks(report: SimReport, method: Optional[str] = None):
    """KS statistic and p-value of the pooled p-values against U(0,1)."""
    pool = pooled_pvalues(report, method)
    if len(pool) == 0:
        raise ValueError("no pooled p-values to test")
    res = kstest(pool, "uniform")
    return float(res.statistic), float(res.pvalue)


def _prop_se(count: int, total: int) -> float:
    if total == 0:
        return float("nan")
    phat = count / total
    return math.sqrt(phat * (1.0 - phat) / total)


@dataclass
class CoefficientTable:
    """Per-coefficient aggregates: signal rows plus a pooled null row.

    ``rows`` maps each nonzero-truth coefficient index to its aggregate
    dict; ``null_row`` pools every zero-truth coefficient ("average over all
    others"). Coverage over zero selections is None, never 0.
    """

    method: str
    alpha: float
    n_replicates: int
    rows: dict
    null_row: Optional[dict]
    per_variable: dict

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "n_replicates": self.n_replicates,
            "rows": {str(k): v for k, v in self.rows.items()},
            "null_row": self.null_row,
            "per_variable": {str(k): v for k, v in self.per_variable.items()},
        }


def _aggregate_cells(cells: list, n_pairs: int) -> dict:
    """cells: (covered, rejected) per selected (replicate, variable) pair."""
    n_sel = len(cells)
    out = {
        "n_selected": n_sel,
        "selection_prop": n_sel / n_pairs if n_pairs else float("nan"),
        "selection_se": _prop_se(n_sel, n_pairs),
    }
    if n_sel == 0:
        out.update(coverage=None, coverage_se=None, rejection_prop=None, rejection_se=None)
        return out
    covered = sum(c for c, _ in cells)
    rejected = sum(r for _, r in cells)
    out.update(
        coverage=covered / n_sel,
        coverage_se=_prop_se(covered, n_sel),
        rejection_prop=rejected / n_sel,
        rejection_se=_prop_se(rejected, n_sel),
    )
    return out


def coefficient_table(
    report: SimReport, method: Optional[str] = None, alpha: Optional[float] = None
) -> CoefficientTable:
    """Coverage / selection / conditional rejection per coefficient.

    Coverage and rejection are conditional on selection: their denominators
    count only replicates where the variable entered the model. The null row
    pools all zero-truth coefficients over (replicate, variable) pairs.
    """
    method = _resolve_method(report, method)
    if alpha is None:
        alpha = report.config.alpha
    beta = report.config.beta
    recs = report.method_records(method)
    n_ok = len(recs)
    cells: dict = {j: [] for j in range(1, report.config.p + 1)}
    for rec in recs:
        for pos, idx in enumerate(rec.coef_indices):
            if idx == 0:
                continue
            covered = int(rec.lower[pos] <= beta[idx - 1] <= rec.upper[pos])
            rejected = int(rec.pvalue[pos] < alpha)
            cells[idx].append((covered, rejected))
    per_variable = {j: _aggregate_cells(cells[j], n_ok) for j in cells}
    signal = [j for j in cells if beta[j - 1] != 0.0]
    nulls = [j for j in cells if beta[j - 1] == 0.0]
    rows = {j: per_variable[j] for j in signal}
    null_row = None
    if nulls:
        pooled = [c for j in nulls for c in cells[j]]
        null_row = _aggregate_cells(pooled, n_ok * len(nulls))
    return CoefficientTable(
        method=method,
        alpha=alpha,
        n_replicates=n_ok,
        rows=rows,
        null_row=null_row,
        per_variable=per_variable,
    )


# -- persistence -----------------------------------------------------------

RECORD_FIELDS = [
    "rep",
    "method",
    "error",
    "intercept_only",
    "selected",
    "coef_index",
    "estimate",
    "se",
    "lower",
    "upper",
    "pvalue",
]


def _fmt(v: float) -> str:
    return repr(float(v))


def write_records_csv(report: SimReport, path: str) -> None:
    """One row per (replicate, method, coefficient); full-precision floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for rec in report.records:
            sel = ";".join(str(j) for j in rec.selected)
            if rec.error is not None:
                writer.writerow([rec.rep, rec.method, rec.error, "", sel, "", "", "", "", "", ""])
                continue
            for pos, idx in enumerate(rec.coef_indices):
                writer.writerow(
                    [
                        rec.rep,
                        rec.method,
                        "",
                        int(rec.intercept_only),
                        sel,
                        idx,
                        _fmt(rec.estimate[pos]),
                        _fmt(rec.se[pos]),
                        _fmt(rec.lower[pos]),
                        _fmt(rec.upper[pos]),
                        _fmt(rec.pvalue[pos]),
                    ]
                )


def read_records_csv(path: str) -> list:
    """Inverse of :func:`write_records_csv`; floats round-trip exactly."""
    groups: dict = {}
    order: list = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            key = (int(row["rep"]), row["method"])
            if key not in groups:
                sel = tuple(int(v) for v in row["selected"].split(";") if v)
                groups[key] = {
                    "rep": key[0],
                    "method": key[1],
                    "selected": sel,
                    "error": row["error"] or None,
                    "intercept_only": row["intercept_only"] == "1",
                    "coef_indices": [],
                    "estimate": [],
                    "se": [],
                    "lower": [],
                    "upper": [],
                    "pvalue": [],
                }
                order.append(key)
            g = groups[key]
            if row["error"]:
                continue
            g["coef_indices"].append(int(row["coef_index"]))
            for name in ("estimate", "se", "lower", "upper", "pvalue"):
                g[name].append(float(row[name]))
    records = []
    for key in order:
        g = groups[key]
        records.append(
            ReplicateRecord(
                rep=g["rep"],
                method=g["method"],
                selected=g["selected"],
                coef_indices=tuple(g["coef_indices"]),
                estimate=tuple(g["estimate"]),
                se=tuple(g["se"]),
                lower=tuple(g["lower"]),
                upper=tuple(g["upper"]),
                pvalue=tuple(g["pvalue"]),
                intercept_only=g["intercept_only"],
                error=g["error"],
            )
        )
    return records


def _aggregates_dict(report: SimReport) -> dict:
    out = {
        "config": report.config.to_dict(),
        "n_errors": report.n_errors,
        "methods": {},
    }
    for m in report.config.methods:
        pool = pooled_pvalues(report, m)
        entry = {
            "coefficient_table": coefficient_table(report, m).to_dict(),
            "n_pooled_pvalues": int(len(pool)),
        }
        if len(pool):
            stat, pv = pvalue_uniformity_ks(report, m)
            entry["ks_statistic"] = stat
            entry["ks_pvalue"] = pv
        out["methods"][m] = entry
    return out


def write_report(report: SimReport, out_dir: str) -> dict:
    """Emit records.csv, aggregates.json, and per-method QQ CSVs.

    Returns the paths written, keyed by artifact name.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {"records": os.path.join(out_dir, "records.csv")}
    write_records_csv(report, paths["records"])
    agg = _aggregates_dict(report)
    paths["aggregates"] = os.path.join(out_dir, "aggregates.json")
    with open(paths["aggregates"], "w") as fh:
        json.dump(agg, fh, indent=2)
        fh.write("\n")
    for m in report.config.methods:
        if agg["methods"][m]["n_pooled_pvalues"] == 0:
            continue
        theo, emp = qq_data(report, m)
        qq_path = os.path.join(out_dir, f"qq_{m}.csv")
        with open(qq_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theoretical", "empirical"])
            for t, e in zip(theo, emp):
                writer.writerow([_fmt(t), _fmt(e)])
        paths[f"qq_{m}"] = qq_path
    return paths


def load_report(out_dir: str) -> SimReport:
    """Read a written report back and verify aggregates against the records.

    Raises ``ValueError`` if the stored aggregates do not match a fresh
    recomputation from the records (a drifted or hand-edited file).
    """
    with open(os.path.join(out_dir, "aggregates.json")) as fh:
        stored = json.load(fh)
    config = SimConfig.from_dict(stored["config"])
    records = read_records_csv(os.path.join(out_dir, "records.csv"))
    report = SimReport(config=config, records=records)
    fresh = json.loads(json.dumps(_aggregates_dict(report)))
    if fresh != stored:
        raise ValueError("stored aggregates do not match recomputation from records")
    return report
