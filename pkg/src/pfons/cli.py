"""Command line interface.

    pfons run    <config.json> [--output-dir DIR] [--no-figures]
    pfons sweep  <config.json> --grid T=1000,2000,4000 [--output-dir DIR] [--no-figures]
    pfons verify <config.json>
    pfons info   <config.json>

Exit codes: 0 success, 2 configuration error, 3 invariant check failure,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError
from .experiment import build_params, make_losses, run_experiment, run_sweep, verify_run
from .losses import stream_constants
from .ons import loo_call_budget, run_online, theoretical_regret_bound, tuned_loo_budget

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_RUNTIME = 4


def _parse_grid(text: str) -> list[int]:
    if not text.startswith("T="):
        raise ConfigError(f"--grid expects T=<comma separated ints>, got {text!r}")
    try:
        values = [int(v) for v in text[2:].split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad --grid value: {exc}") from exc
    if not values or any(v < 1 for v in values):
        raise ConfigError("--grid horizons must be positive integers")
    return values


def _print_checks(checks) -> bool:
    ok = True
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        detail = f" ({c.detail})" if c.detail else ""
        print(f"{status} {c.name}{detail}")
        ok = ok and c.passed
    return ok


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config, output_dir=args.output_dir,
                            render_figures=not args.no_figures)
    report = result.report
    print(f"run complete: T={report.params.T}, blocks={len(report.rows)}, "
          f"loo_calls={report.counter.loo_calls}")
    print(f"total loss {report.total_loss:.6g}, final regret {report.final_regret:.6g}")
    for name, b in result.baseline_reports.items():
        print(f"baseline {name}: final regret {b.final_regret:.6g}")
    ok = _print_checks(result.checks)
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"outputs in {result.out_dir}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    horizons = _parse_grid(args.grid)
    summary = run_sweep(config, horizons, output_dir=args.output_dir,
                        render_figures=not args.no_figures)
    print("T,final_regret,regret_per_round,loo_calls")
    ok = True
    for e in summary["entries"]:
        print(f"{e['T']},{e['final_regret']:.6g},{e['regret_per_round']:.6g},"
              f"{e['total_loo_calls']}")
        ok = ok and e["all_checks_passed"]
    if summary["slope"] is not None:
        print(f"log-log regret slope: {summary['slope']:.4f}")
    print(f"outputs in {summary['out_dir']}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_verify(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config, render_figures=False, write_outputs=False)
    ok = _print_checks(result.checks)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_info(args) -> int:
    config = load_config(args.config)
    feasible_set = config.build_set()
    losses = make_losses(config, feasible_set)
    params = build_params(config, feasible_set, losses)
    consts = stream_constants(losses)
    R = feasible_set.radius_R
    q = params.rho if params.mode in ("lowdim", "sketch") else feasible_set.dim
    print(f"set: {feasible_set.describe()}")
    print(f"constants: G={consts['G']:.6g}, beta={consts['beta']:.6g}, "
          f"alpha={consts['alpha']:.6g}, R={R:.6g}")
    print(f"params: mode={params.mode}, K={params.K}, eta={params.eta:.6g}, "
          f"eps={params.eps:.6g}, eps_I={params.eps_I:.6g}, rho={params.rho}")
    for note in params.adjustments:
        print(f"adjustment: {note}")
    print(f"regret bound: "
          f"{theoretical_regret_bound(params, consts['G'], R, consts['alpha'], consts['beta'], q):.6g}")
    print(f"loo budget: {loo_call_budget(params, consts['G'], R):.6g}")
    if params.tuned:
        print(f"loo budget (tuned form): {tuned_loo_budget(params.T, q):.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfons",
                                     description="Projection-free online Newton step runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment and write reports")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the config across a horizon grid")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", required=True, help="T=1000,2000,4000")
    p_sweep.add_argument("--output-dir", default=None)
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the invariant checks, write nothing")
    p_verify.add_argument("config")
    p_verify.set_defaults(func=cmd_verify)

    p_info = sub.add_parser("info", help="print tuned parameters and bounds")
    p_info.add_argument("config")
    p_info.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
