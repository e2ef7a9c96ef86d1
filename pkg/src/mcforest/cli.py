"""Command-line front end: simulate, generate, fit, report.

Exit code 0 on success; any failure prints a single JSON line
{"error": "..."} to stderr and exits nonzero. The MCF_THREADS environment
variable overrides --parallel.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .data import read_csv, write_csv, concat
from .harness import (
    desk_scale_configs,
    emit_boxplot_svg,
    emit_csv,
    full_scale_configs,
    read_long_csv,
    run_study,
)
from .mcf import EstimatorKind, fit_mcf, predict_all, summarize_fit
from .simgen import generate_pair, resolve_scenario

LONG_CSV_NAME = "results_long.csv"
SVG_NAME = "results.svg"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument errors raise instead of printing usage, so every failure
    leaves through the single machine-readable error line."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcf", description="Multi-study causal forest toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a replication study over one or more scenarios")
    sim.add_argument("--scenario", action="append", required=True,
                     help="preset id (e.g. high-heterogeneity/mid/rho0.2/diff-ps) or scenario JSON path; repeatable")
    sim.add_argument("--reps", type=int, default=None, help="replications per scenario (default 100)")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--parallel", type=int, default=1, help="worker processes")
    sim.add_argument("--full-scale", action="store_true",
                     help="full-size forests and 500 replications unless --reps is given")
    sim.add_argument("--svg", action="store_true", help="also render the box-plot SVG")

    gen = sub.add_parser("generate", help="generate one primary/auxiliary pair as CSV")
    gen.add_argument("--scenario", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path (both studies, s column 0/1)")

    fit = sub.add_parser("fit", help="fit all estimators and predict effects on a test CSV")
    fit.add_argument("--train", required=True, help="primary training CSV")
    fit.add_argument("--aux", required=True, help="auxiliary CSV")
    fit.add_argument("--test", required=True, help="test CSV (covariates are used)")
    fit.add_argument("--out", required=True, help="predictions CSV, one column per estimator")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--full-scale", action="store_true")

    rep = sub.add_parser("report", help="recompute aggregates (and SVG) from a results directory")
    rep.add_argument("--in", dest="indir", required=True, help=f"directory containing {LONG_CSV_NAME}")
    rep.add_argument("--svg", action="store_true", help="render the box-plot SVG")
    return parser


def _cmd_simulate(args) -> int:
    scenarios = [resolve_scenario(s) for s in args.scenario]
    causal_cfg, prop_cfg = full_scale_configs() if args.full_scale else desk_scale_configs()
    reps = args.reps if args.reps is not None else (500 if args.full_scale else 100)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = run_study(scenarios, reps, master_seed=args.seed, parallelism=args.parallel,
                        causal_config=causal_cfg, propensity_config=prop_cfg)
    long_path = emit_csv(summary, out / LONG_CSV_NAME)
    if args.svg:
        emit_boxplot_svg(summary, out / SVG_NAME)
    failed = len(summary.failures)
    print(f"wrote {long_path} ({len(summary.results)} replications, {failed} failed)")
    return 0


def _cmd_generate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    pair = generate_pair(scenario, args.seed)
    write_csv(concat(pair.primary, pair.auxiliary), args.out)
    print(f"wrote {args.out} ({pair.primary.n} primary + {pair.auxiliary.n} auxiliary rows)")
    return 0


def _cmd_fit(args) -> int:
    train = read_csv(args.train)
    aux = read_csv(args.aux)
    test = read_csv(args.test)
    causal_cfg, prop_cfg = full_scale_configs(args.seed) if args.full_scale else desk_scale_configs(args.seed)
    fit = fit_mcf(train, aux, causal_cfg, propensity_config=prop_cfg)
    preds = predict_all(fit, test)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        kinds = list(EstimatorKind)
        writer.writerow([k.value for k in kinds])
        for i in range(test.n):
            writer.writerow([repr(float(preds[k][i])) for k in kinds])
    print(summarize_fit(fit), file=sys.stderr)
    print(f"wrote {out} ({test.n} rows)")
    return 0


def _cmd_report(args) -> int:
    indir = Path(args.indir)
    long_path = indir / LONG_CSV_NAME
    summary = read_long_csv(long_path)
    emit_csv(summary, long_path)
    if args.svg:
        emit_boxplot_svg(summary, indir / SVG_NAME)
    print(f"reported on {long_path} ({len(summary.results)} replications)")
    return 0


def main(argv=None) -> int:
    handlers = {
        "simulate": _cmd_simulate,
        "generate": _cmd_generate,
        "fit": _cmd_fit,
        "report": _cmd_report,
    }
    try:
        args = _build_parser().parse_args(argv)
        return handlers[args.command](args)
    except _UsageError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    except Exception as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
