"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration, 3 budget refusal,
4 invariant failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings

from .config import ConfigError, apply_overrides, dump_config, load_config
from .experiments import run_chow, run_hardness, run_learn, run_pack, run_verify
from .learner import BudgetError
from .sqhard import PackingError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INVARIANT = 4

_RUNNERS = {
    "learn": run_learn,
    "hardness": run_hardness,
    "verify": run_verify,
    "chow": run_chow,
    "pack": run_pack,
}

_HELP = {
    "learn": "learn random positive networks and report held-out relative error",
    "hardness": "moment table, plane packing and correlation decay of hard instances",
    "verify": "run the numerical invariant suite",
    "chow": "Chow-matrix estimation diagnostics only",
    "pack": "near-orthogonal plane packing only",
}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="TOML config file")
    shared.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
    shared.add_argument("--out", metavar="DIR", help="directory for report.json and trials.csv")
    shared.add_argument("--trials", type=int, metavar="N", help="number of seeded trials")
    shared.add_argument("--threads", type=int, metavar="N", help="worker threads for trials")
    shared.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value, e.g. learn.k=2 (repeatable)",
    )
    shared.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    parser = argparse.ArgumentParser(
        prog="pacnet",
        description="Positive one-hidden-layer network learner and SQ hardness laboratory.",
        epilog="Precedence: built-in defaults < --config file < command-line flags.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        sub.add_parser(name, parents=[shared], help=_HELP[name], description=_HELP[name])
    return parser


def _summary_line(report) -> str:
    s = report.summary
    if report.command == "learn":
        e = s["rel_error"]
        return (
            f"learn: {e['n']} trials, rel_error median {e['median']:.4f} "
            f"(IQR {e['iqr']:.4f}, max {e['max']:.4f}), pass rate at 0.15: {s['pass_rate_0.15']:.2f}"
        )
    if report.command == "chow":
        e = s["spectral_error"]
        return f"chow: {e['n']} trials, spectral error median {e['median']:.4g}, max {e['max']:.4g}"
    if report.command == "pack":
        m = report.metrics
        return f"pack: {m['planes']} planes in {m['attempts']} draws, pairwise bound {m['pairwise_bound']:.4f}"
    if report.command == "hardness":
        m = report.metrics
        corr = m["correlation"]
        tail = "correlation suite skipped" if corr is None else f"{corr['violations']} bound violations"
        return (
            f"hardness: E[f^2] = {m['second_moment']:.4g}, max coefficient below k "
            f"{m['max_coefficient_below_k']:.2e}, pairwise bound {m['packing']['pairwise_bound']:.4f}, {tail}"
        )
    lines = [
        f"  {'PASS' if c['passed'] else 'FAIL'}  {c['name']:<26} {c['value']:.3e} <= {c['threshold']:.1e}"
        for c in report.metrics["checks"]
    ]
    lines.append(f"verify: {s['total'] - s['failed']}/{s['total']} invariants pass")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_overrides(
            load_config(args.config),
            args.overrides,
            seed=args.seed,
            out=args.out,
            trials=args.trials,
            threads=args.threads,
        )
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(dump_config(cfg))
        return EXIT_OK

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            report = _RUNNERS[args.command](cfg)
    except BudgetError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PackingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = report.write(cfg.out)
    print(_summary_line(report))
    print(f"report written to {out / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
