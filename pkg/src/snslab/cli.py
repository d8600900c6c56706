"""Command line harness: snslab <temporal|spatial|stopping|invariants>.

Exit codes: 0 success / all invariants pass, 1 invariant failure,
2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import (ERROR_CSV_COLUMNS, RATES_CSV_COLUMNS,
                          STOPPING_CSV_COLUMNS, ConfigError, load_config,
                          run_invariant_suite, run_spatial_study,
                          run_stopping_study, run_temporal_study, write_csv)
from .experiments.invariants import INVARIANTS_CSV_COLUMNS
from .experiments.report import (ensure_outdir, error_table_rows,
                                 maybe_plot_rates, rates_rows)
from .fem.stepping import FEM_ERROR_CSV_COLUMNS
from .stepper import SolverError


def _emit_temporal(result, outdir, plot):
    ensure_outdir(outdir)
    files = []
    pe = os.path.join(outdir, "errors.csv")
    write_csv(pe, ERROR_CSV_COLUMNS, error_table_rows(result.table))
    files.append(pe)
    pr = os.path.join(outdir, "rates.csv")
    write_csv(pr, RATES_CSV_COLUMNS, rates_rows(result.fit,
                                                result.exceed_fraction))
    files.append(pr)
    if plot:
        maybe_plot_rates(result.fit, os.path.join(outdir, "temporal_rates.png"),
                         "step size")
    return files


def _emit_spatial(result, outdir, plot):
    ensure_outdir(outdir)
    files = []
    pe = os.path.join(outdir, "errors.csv")
    write_csv(pe, ERROR_CSV_COLUMNS, error_table_rows(result.table))
    files.append(pe)
    pf = os.path.join(outdir, "fem_errors.csv")
    write_csv(pf, FEM_ERROR_CSV_COLUMNS, result.fem_rows)
    files.append(pf)
    pr = os.path.join(outdir, "rates.csv")
    write_csv(pr, RATES_CSV_COLUMNS, rates_rows(result.fit,
                                                result.exceed_fraction))
    files.append(pr)
    if plot:
        maybe_plot_rates(result.fit, os.path.join(outdir, "spatial_rates.png"),
                         "mesh size")
    return files


def _emit_stopping(result, outdir):
    ensure_outdir(outdir)
    p = os.path.join(outdir, "stopping.csv")
    write_csv(p, STOPPING_CSV_COLUMNS, result.rows)
    return [p]


def _emit_invariants(report, outdir):
    ensure_outdir(outdir)
    p = os.path.join(outdir, "invariants.csv")
    write_csv(p, INVARIANTS_CSV_COLUMNS,
              ((r.name, r.passed, r.measured, r.threshold)
               for r in report.results))
    return [p]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snslab",
        description="Desk-scale convergence experiments for stochastic "
                    "Navier-Stokes discretisations on the periodic box.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("temporal", "spatial", "stopping", "invariants"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="key=value config file")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--paths", type=int, default=None)
        s.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, kind=args.command, seed=args.seed,
                          paths=args.paths, out=args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    try:
        if args.command == "temporal":
            result = run_temporal_study(cfg)
            files = _emit_temporal(result, cfg.out, cfg.plot)
            print(f"temporal slope {result.fit.slope!r} "
                  f"(CI [{result.fit.ci_lo!r}, {result.fit.ci_hi!r}]), "
                  f"xi {result.xi!r}")
        elif args.command == "spatial":
            result = run_spatial_study(cfg)
            files = _emit_spatial(result, cfg.out, cfg.plot)
            print(f"spatial slope {result.fit.slope!r} "
                  f"(CI [{result.fit.ci_lo!r}, {result.fit.ci_hi!r}]), "
                  f"xi {result.xi!r}")
        elif args.command == "stopping":
            result = run_stopping_study(cfg)
            files = _emit_stopping(result, cfg.out)
            probs = " ".join(repr(p) for p in result.probabilities())
            print(f"stopping probabilities {probs} "
                  f"trend_ok {int(result.trend_ok)}")
        else:
            report = run_invariant_suite(cfg)
            files = _emit_invariants(report, cfg.out)
            for r in report.results:
                tag = "pass" if r.passed else "FAIL"
                print(f"{tag} {r.name} measured={r.measured!r} "
                      f"threshold={r.threshold!r}")
            if not report.passed:
                print(f"{len(report.failures)} invariant(s) failed",
                      file=sys.stderr)
                for f in files:
                    print(f"wrote {f}")
                return 1
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SolverError as err:
        step = f" at step {err.step_index}" if err.step_index else ""
        print(f"solver failure{step}: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    for f in files:
        print(f"wrote {f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
