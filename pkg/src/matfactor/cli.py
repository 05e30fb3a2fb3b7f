"""Command-line interface: ``matfactor {fit,simulate,mc-bench,forecast}``.

Every subcommand accepts ``--config FILE`` with flat ``key = value`` lines
whose keys are flag names (``k0 = 3``, ``small-dim = true``); flags given on
the command line override the file. Exit codes: 0 success, 1 usage or
configuration error, 2 numerical/estimation failure.

Outputs (in ``--out``, default ``.``):

* ``fit``       -- ``report.json`` and ``factors.csv`` (``t,row,col,value``)
* ``simulate``  -- ``series.csv``, ``factors_true.csv``, ``common_true.csv``,
  ``truth.json``
* ``mc-bench``  -- ``mc_report.csv`` (one row per grid cell and method) and
  ``mc_report.json``
* ``forecast``  -- ``forecast_errors.csv`` (method, horizon, criterion,
  value) and ``forecast_errors.json``

All JSON documents carry ``schema_version: 1``.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EstimationError, InvalidArgumentError
from .estimator import FitConfig, fit
from .forecast import FORECAST_METHODS, rolling_eval
from .io import ingest_csv, write_json, write_long_csv, write_rows_csv
from .simulate import METHODS, SimConfig, draw_replication, monte_carlo

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ESTIMATION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# argument types


def _pair(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    """``"1,2,4"`` or a range ``"1-4"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _dims_list(text: str) -> list[tuple[int, int]]:
    out = []
    for part in str(text).split(","):
        try:
            a, b = part.lower().split("x")
            out.append((int(a), int(b)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"dimensions must look like 7x7,10x15; got {text!r}") from None
    return out


def _range(text: str) -> tuple[int, int]:
    try:
        a, b = str(text).split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}") from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _methods(allowed):
    def parse(text: str) -> list[str]:
        items = [m.strip() for m in str(text).split(",") if m.strip()]
        bad = [m for m in items if m not in allowed]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"methods must be from {','.join(allowed)}; got {text!r}")
        return items
    return parse


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes (0 = one per CPU)")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k0", type=int, default=2, help="number of lags in M (default 2)")
    p.add_argument("--alpha", type=float, default=0.05, help="white-noise test size")
    p.add_argument("--m", type=int, default=10, help="lags used by the white-noise test")
    p.add_argument("--test", choices=("rank_tm", "ljung_box"), default="rank_tm")
    p.add_argument("--epsilon", type=float, default=0.9, help="truncation fraction when p1 p2 > n")
    p.add_argument("--orders", type=_pair, default=None, metavar="R1,R2", help="fix the factor orders")
    p.add_argument("--k", type=_pair, default=None, metavar="K1,K2", help="fix the diverging-noise counts")
    p.add_argument("--small-dim", type=_bool, nargs="?", const=True, default=False,
                   help="use the bottom eigenvectors of S directly")


def _add_sim_flags(p: argparse.ArgumentParser, grid: bool) -> None:
    if grid:
        p.add_argument("--dims", type=_dims_list, default=[(7, 7)], metavar="P1xP2,...")
        p.add_argument("--n", type=_int_list, default=[300], metavar="N,...")
    else:
        p.add_argument("--p1", type=int, default=7)
        p.add_argument("--p2", type=int, default=7)
        p.add_argument("--n", type=int, default=300)
        p.add_argument("--rep", type=int, default=0, help="replication index to draw")
    p.add_argument("--r1", type=int, default=2)
    p.add_argument("--r2", type=int, default=3)
    p.add_argument("--k1", type=int, default=1)
    p.add_argument("--k2", type=int, default=2)
    p.add_argument("--delta1", type=float, default=0.0)
    p.add_argument("--delta2", type=float, default=0.9)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--reps", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="matfactor", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"matfactor {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fit", help="estimate the factor model of a CSV series")
    p.add_argument("input", nargs="?", help="long CSV with header t,row,col,value")
    _add_common(p)
    _add_fit_flags(p)

    p = sub.add_parser("simulate", help="draw one data set from the simulation model")
    _add_common(p)
    _add_sim_flags(p, grid=False)

    p = sub.add_parser("mc-bench", help="Monte Carlo comparison of the gt and wlc estimators")
    _add_common(p)
    _add_sim_flags(p, grid=True)
    _add_fit_flags(p)
    p.add_argument("--methods", type=_methods(METHODS), default=list(METHODS))

    p = sub.add_parser("forecast", help="rolling-origin forecast errors")
    p.add_argument("input", nargs="?", help="long CSV with header t,row,col,value")
    _add_common(p)
    _add_fit_flags(p)
    p.add_argument("--methods", type=_methods(FORECAST_METHODS), default=list(FORECAST_METHODS))
    p.add_argument("--horizons", type=_int_list, default=[1], metavar="H,...")
    p.add_argument("--origins", type=_range, default=None, metavar="START:END",
                   help="1-based prefix lengths, inclusive (default: second half)")
    p.add_argument("--refit-orders", type=_bool, nargs="?", const=True, default=False,
                   help="re-select the orders at every origin")
    return parser


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise UsageError(f"unknown command {name!r}")


def parse_args(argv) -> argparse.Namespace:
    """Parse ``argv``, layering config-file values under explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage().strip())
    if getattr(args, "config", None):
        entries = read_config_file(args.config)
        sub = _subparser(parser, args.command)
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in entries.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise UsageError(f"{args.config}: unknown key {key!r}")
            action = known[dest]
            conv = action.type or (lambda s: s)
            try:
                defaults[dest] = conv(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"{args.config}: {key}: {exc}") from None
            if action.choices and defaults[dest] not in action.choices:
                raise UsageError(f"{args.config}: {key} must be one of {sorted(action.choices)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# --------------------------------------------------------------------------
# commands


def _fit_config(args) -> FitConfig:
    return FitConfig(k0=args.k0, alpha=args.alpha, m=args.m, test=args.test,
                     epsilon=args.epsilon, k=args.k, small_dim_path=args.small_dim,
                     orders=args.orders)


def _require_input(args):
    if not args.input:
        raise UsageError(f"matfactor {args.command}: an input CSV file is required")
    if not Path(args.input).is_file():
        raise UsageError(f"input file not found: {args.input}")
    return ingest_csv(args.input)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(command: str, args, echo: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "command": command,
        "seed": args.seed,
        "config": echo,
    }


def cmd_fit(args) -> int:
    series = _require_input(args)
    config = _fit_config(args)
    out = _outdir(args)
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fit(series, config)
    elapsed = time.perf_counter() - start
    report = _header("fit", args, {"input": str(args.input), **config.to_dict()})
    report.update({
        "n": series.n, "p1": series.p1, "p2": series.p2,
        "orders": [res.r1, res.r2],
        "order_trace": res.order_trace.to_list(),
        "eig_M1": res.loadings.eig_M1, "eig_M2": res.loadings.eig_M2,
        "A1": res.loadings.A1, "P1": res.loadings.P1,
        "mean": res.mean,
        "factors_file": "factors.csv",
        "warnings": [str(w.message) for w in caught],
        "timing_seconds": elapsed,
    })
    den = res.denoiser
    if den is not None:
        report.update({
            "k": [den.k1, den.k2],
            "k_upper": [den.k1_upper, den.k2_upper],
            "k_band": [[den.k1, max(den.k1, den.k1_upper)], [den.k2, max(den.k2, den.k2_upper)]],
            "eig_S1": den.eig_S1, "eig_S2": den.eig_S2,
            "B2": den.B2, "Q2": den.Q2,
            "sigma_min": {"B2'A1": den.sigma_min_front, "P1'Q2": den.sigma_min_back},
        })
    write_long_csv(out / "factors.csv", res.factors)
    write_json(out / "report.json", report)
    print(f"orders: ({res.r1}, {res.r2})")
    if den is not None:
        print(f"k: ({den.k1}, {den.k2})")
    print(f"wrote {out / 'report.json'} and {out / 'factors.csv'}")
    return EXIT_OK


def _sim_config(args, p1, p2, n) -> SimConfig:
    return SimConfig(p1=p1, p2=p2, r1=args.r1, r2=args.r2, k1=args.k1, k2=args.k2,
                     delta1=args.delta1, delta2=args.delta2, n=n, seed=args.seed,
                     reps=args.reps, burn_in=args.burn_in)


def cmd_simulate(args) -> int:
    config = _sim_config(args, args.p1, args.p2, args.n)
    if not 0 <= args.rep < config.reps:
        raise InvalidArgumentError(f"rep must lie in 0..{config.reps - 1}")
    out = _outdir(args)
    draw = draw_replication(config, args.rep)
    t = draw.truth
    write_long_csv(out / "series.csv", draw.series.data)
    write_long_csv(out / "factors_true.csv", t.factor_series)
    write_long_csv(out / "common_true.csv", t.common_true)
    doc = _header("simulate", args, {**config.to_dict(), "rep": args.rep})
    doc.update({"L1": t.L1, "L2": t.L2, "R1": t.R1, "R2": t.R2,
                "Phi": np.diag(t.Phi), "Psi": np.diag(t.Psi)})
    write_json(out / "truth.json", doc)
    print(f"wrote {out / 'series.csv'} (n={config.n}, p=({config.p1},{config.p2}))")
    return EXIT_OK


def cmd_mc_bench(args) -> int:
    fit_config = _fit_config(args)
    grid = [_sim_config(args, p1, p2, n) for (p1, p2) in args.dims for n in args.n]
    out = _outdir(args)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cells = monte_carlo(grid, fit_config, methods=args.methods, threads=args.threads)
    elapsed = time.perf_counter() - start
    write_rows_csv(out / "mc_report.csv", [c.to_row() for c in cells])
    echo = {"dims": [list(d) for d in args.dims], "n": list(args.n), "r1": args.r1, "r2": args.r2,
            "k1": args.k1, "k2": args.k2, "delta1": args.delta1, "delta2": args.delta2,
            "reps": args.reps, "burn_in": args.burn_in, "methods": list(args.methods),
            **fit_config.to_dict()}
    doc = _header("mc-bench", args, echo)
    doc.update({
        "note": "wlc reuses the lagged aggregate M of the gt estimator",
        "cells": [c.to_dict() for c in cells],
        "timing_seconds": elapsed,
    })
    write_json(out / "mc_report.json", doc)
    for c in cells:
        r = c.to_row()
        print(f"p=({r['p1']},{r['p2']}) n={r['n']} {r['method']}: P(r_hat=r)={r['prob_correct']:.3f} "
              f"factor_error={r['factor_error_mean']:.3f} failures={r['failures']}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    series = _require_input(args)
    config = _fit_config(args)
    hmax = max(args.horizons)
    if min(args.horizons) < 1:
        raise UsageError("horizons must be >= 1")
    if args.origins is None:
        origins = range(max(2, series.n // 2), series.n - hmax + 1)
    else:
        a, b = args.origins
        if a < 2 or b > series.n - hmax or a > b:
            raise UsageError(f"origins {a}:{b} outside 2:{series.n - hmax}")
        origins = range(a, b + 1)
    if len(origins) == 0:
        raise UsageError("no forecast origins in range")
    out = _outdir(args)
    rows, evals = [], []
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in args.methods:
            ev = rolling_eval(series, method, args.horizons, origins, config,
                              refit_orders=args.refit_orders, threads=args.threads)
            evals.append(ev)
            for h in ev.horizons:
                for crit in ("FE_F", "FE_2"):
                    rows.append({"method": method, "horizon": h, "criterion": crit,
                                 "value": ev.errors[h][crit]})
    elapsed = time.perf_counter() - start
    write_rows_csv(out / "forecast_errors.csv", rows)
    echo = {"input": str(args.input), "methods": list(args.methods),
            "horizons": list(args.horizons), "origins": [origins[0], origins[-1]],
            "refit_orders": args.refit_orders, **config.to_dict()}
    doc = _header("forecast", args, echo)
    doc.update({"results": [e.to_dict() for e in evals], "timing_seconds": elapsed})
    write_json(out / "forecast_errors.json", doc)
    for r in rows:
        print(f"{r['method']} h={r['horizon']} {r['criterion']}={r['value']:.6g}")
    for e in evals:
        if e.flagged:
            print(f"warning: {e.method} excluded {len(e.excluded)} of {len(e.origins)} origins",
                  file=sys.stderr)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "mc-bench": cmd_mc_bench,
            "forecast": cmd_forecast}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("usage: matfactor {fit,simulate,mc-bench,forecast} [options]; see --help",
              file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimationError, np.linalg.LinAlgError) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
