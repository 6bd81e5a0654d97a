"""Command-line front end: draw-and-split, information audit, simulation study.

Three subcommands:

* ``fission sample``: draw from a named distribution, split each draw with a
  fission rule, write one CSV row per draw (columns x, fold1, fold2, or
  x, fold_1..fold_K for K-fold thinning).
* ``fission info-audit``: information ledgers for Poisson thinning vs the
  calibrated additive-noise split, as JSON.
* ``fission simulate``: replicated selective-inference study; writes
  records.csv, aggregates.json, and QQ CSVs to --out-dir. Exit status 0 only
  when the study completes within the replicate error budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import fission as fi
from .distributions import DistributionSpec, Family, sample
from .harness import (
    SimConfig,
    coefficient_table,
    pvalue_uniformity_ks,
    run_study,
    write_report,
)
from .infoaudit import audit_poisson_pair
from .rng import child_rng

SIGNAL_BETA = {1: -0.9, 2: 2.1, 3: -1.5}


def _parse_dist(text: str) -> DistributionSpec:
    """family:comma-separated-params, e.g. poisson:2 or gaussian:0,1."""
    try:
        name, _, raw = text.partition(":")
        params = tuple(float(v) for v in raw.split(",")) if raw else ()
        fam = Family(name.strip().lower())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse distribution {text!r}: {exc}") from exc
    try:
        return DistributionSpec(fam, params)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_beta(text: str, p: int) -> tuple:
    """index=value pairs, 1-based, e.g. '1=-0.9,2=2.1,3=-1.5'."""
    beta = [0.0] * p
    if text:
        for part in text.split(","):
            idx, _, val = part.partition("=")
            j = int(idx)
            if not (1 <= j <= p):
                raise argparse.ArgumentTypeError(f"beta index {j} outside 1..{p}")
            beta[j - 1] = float(val)
    return tuple(beta)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fission")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sample", help="draw, split, and write folds as CSV")
    ps.add_argument("--rule", required=True, choices=[k.value for k in fi.RuleKind])
    ps.add_argument("--eps", type=float, default=None)
    ps.add_argument("--tau", type=float, default=None)
    ps.add_argument("--sigma-tilde-sq", type=float, default=None)
    ps.add_argument("--r", type=float, default=None, help="known overdispersion (negbin-p1)")
    ps.add_argument("--k-vector", default=None, help="thinning probabilities, e.g. 0.2,0.3,0.5")
    ps.add_argument("--dist", required=True, type=_parse_dist, help="family:params")
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--out", required=True)

    pa = sub.add_parser("info-audit", help="information ledger, thinning vs additive noise")
    pa.add_argument("--family", required=True, choices=["poisson"])
    pa.add_argument("--theta", type=float, required=True)
    pa.add_argument("--eps", type=float, required=True)
    pa.add_argument("--n-mc", type=int, default=100_000)
    pa.add_argument("--seed", type=int, required=True)
    pa.add_argument("--out", required=True)

    pm = sub.add_parser("simulate", help="replicated selective-inference study")
    pm.add_argument("--scenario", required=True, choices=["global-null", "signal", "custom"])
    pm.add_argument("--method", default="both", choices=["flawed", "corrected", "both"])
    pm.add_argument("--n", type=int, default=500)
    pm.add_argument("--p", type=int, default=50)
    pm.add_argument("--eps", type=float, default=0.8)
    pm.add_argument("--reps", type=int, default=300)
    pm.add_argument("--seed", type=int, required=True)
    pm.add_argument("--threads", type=int, default=None, help="default: FISSION_THREADS or 1")
    pm.add_argument("--out-dir", required=True)
    pm.add_argument("--beta0", type=float, default=0.6)
    pm.add_argument("--beta", default="", help="custom scenario slopes as j=v,... (1-based)")
    pm.add_argument("--cv-rule", default="min", choices=["min", "1se"])
    pm.add_argument("--n-folds", type=int, default=10)
    pm.add_argument("--level", type=float, default=0.95)
    pm.add_argument("--alpha", type=float, default=0.05)
    return parser


# -- sample ----------------------------------------------------------------

_RULE_FLAGS = {
    fi.RuleKind.GAUSSIAN_P1: {"eps"},
    fi.RuleKind.GAUSSIAN_MISSPEC_P2: {"eps", "sigma_tilde_sq"},
    fi.RuleKind.POISSON_THIN_P1: {"eps", "k_vector"},
    fi.RuleKind.POISSON_TAU_P2: {"tau"},
    fi.RuleKind.NEGBIN_P1: {"eps", "r"},
    fi.RuleKind.NEGBIN_VIA_POISSON_P2: {"eps"},
    fi.RuleKind.BERNOULLI_P2: {"eps"},
}

_RULE_FAMILY = {
    fi.RuleKind.GAUSSIAN_P1: Family.GAUSSIAN,
    fi.RuleKind.GAUSSIAN_MISSPEC_P2: Family.GAUSSIAN,
    fi.RuleKind.POISSON_THIN_P1: Family.POISSON,
    fi.RuleKind.POISSON_TAU_P2: Family.POISSON,
    fi.RuleKind.NEGBIN_P1: Family.NEGBIN,
    fi.RuleKind.NEGBIN_VIA_POISSON_P2: Family.NEGBIN,
    fi.RuleKind.BERNOULLI_P2: Family.BERNOULLI,
}


def _cmd_sample(args) -> int:
    kind = fi.RuleKind(args.rule)
    given = {
        name
        for name in ("eps", "tau", "sigma_tilde_sq", "r", "k_vector")
        if getattr(args, name) is not None
    }
    allowed = _RULE_FLAGS[kind]
    extra = given - allowed
    if extra:
        print(f"error: rule {kind.value} does not take {sorted(extra)}", file=sys.stderr)
        return 2
    spec = args.dist
    if spec.family is not _RULE_FAMILY[kind]:
        print(
            f"error: rule {kind.value} splits {_RULE_FAMILY[kind].value} draws, "
            f"got {spec.family.value}",
            file=sys.stderr,
        )
        return 2

    rng = child_rng(args.seed)
    x = sample(spec, rng, args.n)

    if kind is fi.RuleKind.POISSON_THIN_P1:
        if (args.eps is None) == (args.k_vector is None):
            print("error: poisson-thin-p1 takes exactly one of --eps / --k-vector", file=sys.stderr)
            return 2
        probs = args.eps if args.eps is not None else [float(v) for v in args.k_vector.split(",")]
        foldset = fi.fission_poisson_thin(x, probs, rng)
        k = len(foldset.probs)
        header = ["x"] + [f"fold_{i + 1}" for i in range(k)]
        rows = [[int(xi)] + [int(v) for v in foldset.folds[i]] for i, xi in enumerate(x)]
    else:
        if kind is fi.RuleKind.GAUSSIAN_P1:
            if args.eps is None:
                print("error: gaussian-p1 requires --eps", file=sys.stderr)
                return 2
            pair = fi.fission_gaussian_p1(x, spec.sigma_sq, args.eps, rng)
        elif kind is fi.RuleKind.GAUSSIAN_MISSPEC_P2:
            if args.eps is None or args.sigma_tilde_sq is None:
                print("error: gaussian-misspec-p2 requires --eps and --sigma-tilde-sq", file=sys.stderr)
                return 2
            pair = fi.fission_gaussian_misspec_p2(x, args.sigma_tilde_sq, args.eps, rng)
        elif kind is fi.RuleKind.POISSON_TAU_P2:
            if args.tau is None:
                print("error: poisson-tau-p2 requires --tau", file=sys.stderr)
                return 2
            pair = fi.fission_poisson_tau_p2(x, args.tau, rng)
        elif kind is fi.RuleKind.NEGBIN_P1:
            if args.eps is None:
                print("error: negbin-p1 requires --eps", file=sys.stderr)
                return 2
            known_r = args.r if args.r is not None else spec.r
            if abs(known_r - spec.r) > 1e-12:
                print("error: --r must match the distribution's overdispersion", file=sys.stderr)
                return 2
            pair = fi.fission_negbin_p1(x, known_r, args.eps, rng)
        elif kind is fi.RuleKind.NEGBIN_VIA_POISSON_P2:
            if args.eps is None:
                print("error: negbin-via-poisson-p2 requires --eps", file=sys.stderr)
                return 2
            pair = fi.fission_negbin_via_poisson_p2(x, args.eps, rng)
        else:  # bernoulli-p2
            if args.eps is None:
                print("error: bernoulli-p2 requires --eps", file=sys.stderr)
                return 2
            pair = fi.fission_bernoulli_p2(x, args.eps, rng)
        header = ["x", "fold1", "fold2"]
        if spec.family is Family.GAUSSIAN:
            rows = [
                [repr(float(xi)), repr(float(f1)), repr(float(f2))]
                for xi, f1, f2 in zip(x, pair.fold1, pair.fold2)
            ]
        else:
            rows = [
                [int(xi), int(f1), int(f2)]
                for xi, f1, f2 in zip(x, pair.fold1, pair.fold2)
            ]

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


# -- info-audit ------------------------------------------------------------


def _cmd_info_audit(args) -> int:
    rng = child_rng(args.seed)
    result = audit_poisson_pair(args.theta, args.eps, n_mc=args.n_mc, rng=rng)
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    verdict = result["inequality"]
    print(
        f"tau = {result['tau']}; "
        f"inverse test info: thinning {verdict['rhs']}, "
        f"additive-noise {'infinite' if verdict['lhs']['infinite'] else verdict['lhs']['value']}; "
        f"inequality holds: {verdict['holds']}"
    )
    print(f"wrote {args.out}")
    return 0


# -- simulate --------------------------------------------------------------


def _cmd_simulate(args) -> int:
    if args.scenario == "global-null":
        beta = (0.0,) * args.p
    elif args.scenario == "signal":
        beta = tuple(SIGNAL_BETA.get(j, 0.0) for j in range(1, args.p + 1))
    else:
        try:
            beta = _parse_beta(args.beta, args.p)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            print(f"fission simulate: {exc}", file=sys.stderr)
            return 2
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("FISSION_THREADS", "1"))
    config = SimConfig(
        n=args.n,
        p=args.p,
        beta0=args.beta0,
        beta=beta,
        eps=args.eps,
        n_reps=args.reps,
        method=args.method,
        seed=args.seed,
        n_folds=args.n_folds,
        cv_rule=args.cv_rule,
        level=args.level,
        alpha=args.alpha,
        threads=threads,
    )
    try:
        report = run_study(config)
    except RuntimeError as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return 1
    paths = write_report(report, args.out_dir)
    print(f"{config.n_reps} replicates, {report.n_errors} errors (budget 1%)")
    for m in config.methods:
        try:
            stat, pv = pvalue_uniformity_ks(report, m)
            print(f"[{m}] pooled p-values vs U(0,1): KS stat {stat:.4f}, p {pv:.4g}")
        except ValueError:
            print(f"[{m}] no pooled p-values (all selections empty)")
        table = coefficient_table(report, m)
        for j, row in sorted(table.rows.items()):
            print(
                f"[{m}] variable {j}: selection {row['selection_prop']:.3f}, "
                f"coverage {row['coverage'] if row['coverage'] is not None else 'n/a'}, "
                f"rejection {row['rejection_prop'] if row['rejection_prop'] is not None else 'n/a'}"
            )
        if table.null_row is not None:
            nr = table.null_row
            print(
                f"[{m}] null variables: selection {nr['selection_prop']:.3f}, "
                f"rejection {nr['rejection_prop'] if nr['rejection_prop'] is not None else 'n/a'}"
            )
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "sample":
        return _cmd_sample(args)
    if args.command == "info-audit":
        return _cmd_info_audit(args)
    return _cmd_simulate(args)


if __name__ == "__main__":
    sys.exit(main())
