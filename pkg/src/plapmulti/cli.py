"""Command-line interface: solve, sweep, lambda-star, and check subcommands.

Exit codes: 0 when all checks pass, 2 when checks fail, 1 on errors.
"""

import argparse
import os
import sys
from dataclasses import replace

from .harness import (
    BifurcationTable,
    export_report,
    load_config,
    load_report,
    reverify_report,
    run_scenario,
    save_report_fields,
    sweep_lambda,
)
from .mesh import build_mesh
from .solvers import estimate_lambda_star

EPILOG = """\
sweep CSV columns:
  lambda,fraction,A,B,C,t1,t2,t3,in_region,J1,J2,J3,t_scale1,t_scale3,conv1,conv2,conv3
  One header line, then one line per lambda (sorted).  t1..t3 are the fiber
  roots along the extremal direction (nan when absent); J1/J2/J3 are branch
  energies filled on rows where a full solve ran.

solve outputs:
  report.json / report.csv plus solution_first.csv, solution_pass.csv,
  solution_third.csv (one row per node: coordinates..., value).

config file: flat `key = value` lines (TOML-compatible subset).  Keys:
  dimension, extent[_x|_y], nodes[_x|_y], alpha, p, beta, gamma,
  lambda | lambda_fraction, seed, residual_tolerance, max_iterations,
  path_points, out_dir.
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plapmulti",
        description=(
            "Compute the three positive solutions of the perturbed "
            "concave-convex p-Laplacian problem and verify their properties."
        ),
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario config file")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub.add_parser("solve", parents=[common], help="run one scenario and grade it")
    sw = sub.add_parser("sweep", parents=[common], help="lambda sweep along the extremal direction")
    sw.add_argument(
        "--grid",
        default="0.1,0.3,0.5,0.9",
        help="comma-separated lambda fractions (may exceed 1)",
    )
    sw.add_argument(
        "--solve-at",
        default=None,
        help="fractions receiving full solves (default: every grid value < 1)",
    )
    sub.add_parser("lambda-star", parents=[common], help="estimate the threshold only")

    chk = sub.add_parser("check", help="re-verify a stored report")
    chk.add_argument("--report", required=True, help="report JSON produced by solve")
    chk.add_argument("--quiet", action="store_true")
    return parser


def _apply_seed(config, seed):
    if seed is None:
        return config
    return replace(
        config,
        seed=seed,
        first_options=replace(config.first_options, seed=seed),
        third_options=replace(config.third_options, seed=seed),
        pass_options=replace(config.pass_options, seed=seed),
    )


def _cmd_solve(args) -> int:
    config = _apply_seed(load_config(args.config), args.seed)
    out_dir = args.out or config.out_dir
    report = run_scenario(config)
    os.makedirs(out_dir, exist_ok=True)
    export_report(report, args.format, os.path.join(out_dir, f"report.{args.format}"))
    if report.results:
        save_report_fields(report, out_dir)
    if not args.quiet:
        for c in report.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
        print(f"report: {'PASS' if report.passed else 'FAIL'}  (lambda={report.lambda_used:.6g})")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return 0 if report.passed else 2


def _cmd_sweep(args) -> int:
    config = _apply_seed(load_config(args.config), args.seed)
    grid = [float(tok) for tok in args.grid.split(",") if tok.strip()]
    solve_at = None
    if args.solve_at is not None:
        solve_at = [float(tok) for tok in args.solve_at.split(",") if tok.strip()]
    table = sweep_lambda(config, grid, solve_at=solve_at)
    out_dir = args.out or config.out_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"sweep.{args.format}")
    export_report(table, args.format, path)
    if not args.quiet:
        lost = table.lost_at_fraction
        print(f"lambda_star = {table.lambda_star:.10g}")
        print(f"rows: {len(table.rows)}; triple-root region lost at fraction: {lost}")
        print(f"wrote {path}")
    solved = [r for r in table.rows if r["error"] or r["conv1"] or r["conv2"] or r["conv3"]]
    bad = [r for r in solved if r["error"] or not (r["conv1"] and r["conv2"] and r["conv3"])]
    return 2 if bad else 0


def _cmd_lambda_star(args) -> int:
    config = _apply_seed(load_config(args.config), args.seed)
    mesh = build_mesh(config.mesh)
    est = estimate_lambda_star(mesh, config.exponents(0.0), config.first_options)
    print(f"lambda_star = {est.lambda_star:.17g}")
    print(f"rho = {est.rho:.17g}")
    if not args.quiet:
        print(f"lambda_root_margin = {est.lambda_root_margin:.17g}")
        print(f"lambda_ray_positive = {est.lambda_ray_positive:.17g}")
        print(f"lambda_far_dip = {est.lambda_far_dip:.17g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        import json

        with open(os.path.join(args.out, "lambda_star.json"), "w") as fh:
            json.dump(
                {
                    "lambda_star": est.lambda_star,
                    "rho": est.rho,
                    "lambda_root_margin": est.lambda_root_margin,
                    "lambda_ray_positive": est.lambda_ray_positive,
                    "lambda_far_dip": est.lambda_far_dip,
                },
                fh,
                sort_keys=True,
                indent=2,
            )
            fh.write("\n")
    return 0


def _cmd_check(args) -> int:
    report = reverify_report(load_report(args.report))
    if not args.quiet:
        for c in report.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
        print(f"report: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "lambda-star": _cmd_lambda_star,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
