"""Command-line entry point: ``run``, ``compare`` and ``verify``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import subsets as _subsets
from .bounds import InteractionSets, load_interaction_sets
from .config import load_config
from .errors import ProxySAError, ReportIOError
from .models import builtin
from .oracle import verification_suite
from .report import aggregated_bounds, render_csv, render_json, run_study

VERIFY_SCOPES = ("equalities", "anova", "inequalities", "all")


def _add_study_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON study configuration")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="report format")
    p.add_argument("--sampler", choices=("sobol", "prng"))
    p.add_argument("--m", type=int, help="points per replicate")
    p.add_argument("--seed", type=int, help="base PRNG seed")
    p.add_argument("--skip", type=int, help="Sobol skip offset")
    p.add_argument("--replicates", type=int, help="number of replicates R")
    p.add_argument("--derivatives", choices=("auto", "analytic", "fd"))
    p.add_argument("--fd-step", type=float, help="relative finite-difference step")
    p.add_argument("--order", type=int, help="largest subset size")
    p.add_argument("--subsets", help='explicit subsets, e.g. "1;2;1,3"')
    p.add_argument("--workers", type=int, help="replicate threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxy-sa",
        description="Derivative-based proxies for total and total-interaction sensitivity indices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="estimate proxies and write the report table")
    _add_study_args(run)

    cmp_ = sub.add_parser("compare", help="as run, plus classical bounds U_u and aggregated bounds")
    _add_study_args(cmp_)
    cmp_.add_argument("--interaction-sets", help="file listing the active subsets A_j")

    ver = sub.add_parser("verify", help="run the quadrature identity suites")
    ver.add_argument("--scope", choices=VERIFY_SCOPES, default="all")
    ver.add_argument("--nodes", type=int, default=128, help="Gauss-Legendre nodes per axis")
    ver.add_argument("--out", help="output file (default: stdout)")
    ver.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _config_from_args(args):
    config = load_config(args.config)
    subs = _subsets.parse_list(args.subsets) if args.subsets else None
    return config.with_overrides(
        sampler=args.sampler, m=args.m, seed=args.seed, skip=args.skip, replicates=args.replicates,
        derivatives=args.derivatives, fd_step=args.fd_step, order=args.order, subsets=subs,
        out=args.out, format=args.format, workers=args.workers,
    )


def _emit(text: str, out) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ReportIOError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _cmd_run(args, compare: bool) -> int:
    config = _config_from_args(args)
    table = run_study(config, classical=True)
    if compare:
        model = builtin(config.model, **config.params)
        if args.interaction_sets:
            sets = load_interaction_sets(args.interaction_sets, model.d)
        elif model.interaction_sets is not None:
            sets = InteractionSets(model.interaction_sets)
        else:
            sets = None
        agg = aggregated_bounds(table, model.d, sets)
        table = type(table)(table.rows, dict(table.metadata, aggregated_bounds=agg))
        for key, value in agg.items():
            if value is not None:
                print(f"# {key}: {value}", file=sys.stderr)
    if config.format == "json":
        text = render_json(table)
    else:
        text = render_csv(table, compare=compare)
    _emit(text, config.out)
    return 0


def _cmd_verify(args) -> int:
    reports = verification_suite(args.scope, nodes=args.nodes)
    if args.format == "json":
        text = json.dumps([r.as_dict() for r in reports], indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("statement", "relation", "residual", "slack", "tolerance", "passed"))
        for r in reports:
            writer.writerow((r.statement, r.relation, f"{r.residual:.3e}", f"{r.slack:.3e}",
                             f"{r.tolerance:.1e}", "PASS" if r.passed else "FAIL"))
        text = buf.getvalue()
    _emit(text, args.out)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"FAILED: {r.statement} (residual {r.residual:.3e}, slack {r.slack:.3e})", file=sys.stderr)
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed", file=sys.stderr)
    return 0 if not failed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_run(args, compare=args.command == "compare")
    except ProxySAError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
