"""Command-line entry point.

    karlin run <config.toml> [--set key=value]... [--out DIR] [--threads N] [--seed S]
    karlin eval m-coeff --alpha A --beta B --times T... --delta D...

Exit codes: 0 all gates pass, 2 usage error, 3 budget exceeded, 4 gate failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .config import Config, ConfigError
from .experiments import emit_plot_data, run_experiment
from .model import BudgetError, PlanWarning
from .special_functions import DomainError, ParityPattern
from .theory import m_coeff

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_GATE = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"karlin: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="karlin", description="Karlin stable process simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("config")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a dotted config key (value parsed as a TOML literal)")
    run.add_argument("--out", default=None, help="output directory (default: output.dir or ./karlin-out)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int, default=None)

    ev = sub.add_parser("eval", help="evaluate a theory quantity")
    ev_sub = ev.add_subparsers(dest="quantity", required=True)
    mc = ev_sub.add_parser("m-coeff", help="CF coefficient for a parity pattern")
    mc.add_argument("--alpha", type=float, required=True)
    mc.add_argument("--beta", type=float, required=True)
    mc.add_argument("--times", type=float, nargs="+", required=True)
    mc.add_argument("--delta", type=int, nargs="+", required=True)
    mc.add_argument("--rtol", type=float, default=1e-8)
    return parser


def _run(args) -> int:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"plan.seed={args.seed}")
    if args.threads < 1:
        raise ConfigError("--threads", "must be >= 1")
    cfg = Config.load(args.config, overrides)
    out = Path(args.out or cfg.get("output.dir", "karlin-out"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PlanWarning)
        report = run_experiment(cfg, threads=args.threads)
    for w in caught:
        if issubclass(w.category, PlanWarning):
            print(f"karlin: warning: {w.message}", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    name = report.experiment
    if cfg.get("output.json", True):
        (out / f"{name}.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    if cfg.get("output.csv", True):
        (out / f"{name}.csv").write_text(emit_plot_data(report), encoding="utf-8", newline="\n")
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.id}: simulated={c.simulated:.6g} "
              f"theoretical={c.theoretical:.6g} tol={c.tolerance:.3g}")
    return EXIT_OK if report.passed else EXIT_GATE


def _eval(args) -> int:
    pattern = ParityPattern(args.times, args.delta)
    print(format(m_coeff(args.alpha, args.beta, pattern, rtol=args.rtol), ".17g"))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _eval(args)
    except ConfigError as exc:
        print(f"karlin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"karlin: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"karlin: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
