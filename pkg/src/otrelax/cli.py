"""Command-line interface: ot, otr, bound, and experiment subcommands.

Results go to stdout (machine-parseable ``key value`` lines, 12
significant digits) or to files; diagnostics go to stderr.  Exit codes:
0 success, 1 validation error (bad measure file, bad flag), 2 numerical
failure.  All randomness sits behind an explicit --seed.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, bounds, costs, experiment, relaxation, transport
from .errors import SolverError, ValidationError
from .measures import load_measure_csv


def _fmt(value: float) -> str:
    return format(value, ".12g")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1, not 2."""

    def error(self, message):
        raise ValidationError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="otrelax", description=__doc__)
    parser.add_argument("--version", action="version", version=f"otrelax {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ot = sub.add_parser("ot", help="exact transport cost between two measures")
    p_ot.add_argument("--mu", required=True, help="first measure CSV")
    p_ot.add_argument("--nu", required=True, help="second measure CSV")
    p_ot.add_argument("--cost", required=True, help="euclid | sqeuclid | power:K")
    p_ot.add_argument("--plan", help="write the optimal plan CSV (i,j,mass)")

    p_otr = sub.add_parser("otr", help="relaxed transport cost over a delta-ball")
    p_otr.add_argument("--mu", required=True)
    p_otr.add_argument("--nu", required=True)
    p_otr.add_argument("--delta", required=True, type=float)
    p_otr.add_argument("--cost", required=True, help="euclid | sqeuclid | power:K")
    p_otr.add_argument(
        "--ctilde", help="pricing cost if different from --cost (default: same)"
    )
    p_otr.add_argument("--method", choices=["auto", "generic", "closed"], default="auto")
    p_otr.add_argument("--map", help="write the recovered map CSV (y_idx,w_idx,x...,mass)")

    p_bound = sub.add_parser("bound", help="finite-sample deviation bound report")
    p_bound.add_argument("--n", required=True, type=int)
    p_bound.add_argument("--rho", required=True, type=float)
    p_bound.add_argument("--zeta", required=True, type=float)
    p_bound.add_argument("--k", required=True, type=float)
    p_bound.add_argument("--delta", required=True, type=float)
    p_bound.add_argument("--dim", required=True, type=int)
    p_bound.add_argument("--lam", type=float, help="dual multiplier (required for k=1)")
    p_bound.add_argument("--lipschitz-ctilde", type=float, default=1.0)
    p_bound.add_argument("--refined", action="store_true", help="tighter chaining integral")
    p_bound.add_argument(
        "--optimized", action="store_true", help="also print the cut-off-optimized bound"
    )
    p_bound.add_argument("--grid", choices=["n", "delta"], help="sweep variable")
    p_bound.add_argument("--grid-values", help="comma-separated sweep values")
    p_bound.add_argument("--grid-out", help="sweep CSV path (default: stdout)")

    p_exp = sub.add_parser("experiment", help="estimation experiment (CSV + SVG)")
    p_exp.add_argument("--config", help="JSON config overriding the preset")
    p_exp.add_argument("--preset", choices=["desk", "paper"], default="desk")
    p_exp.add_argument("--out", required=True, help="output directory")
    p_exp.add_argument("--seed", type=int, help="root seed (or set it in the config)")
    p_exp.add_argument("--threads", type=int, default=1)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {
            "ot": _cmd_ot,
            "otr": _cmd_otr,
            "bound": _cmd_bound,
            "experiment": _cmd_experiment,
        }[args.command]
        handler(args)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def _cmd_ot(args) -> None:
    mu = load_measure_csv(args.mu)
    nu = load_measure_csv(args.nu)
    spec = costs.CostSpec.parse(args.cost)
    if mu.dim != nu.dim:
        raise ValidationError(f"measure dimensions differ: {mu.dim} vs {nu.dim}")
    plan = transport.solve_ot(mu, nu, costs.cost_matrix(spec, mu.points, nu.points))
    if args.plan:
        _write_plan_csv(plan, args.plan)
    print(f"value {_fmt(plan.value)}")


def _cmd_otr(args) -> None:
    mu = load_measure_csv(args.mu)
    nu = load_measure_csv(args.nu)
    c = costs.CostSpec.parse(args.cost)
    ctilde = costs.CostSpec.parse(args.ctilde) if args.ctilde else c
    if mu.dim != nu.dim:
        raise ValidationError(f"measure dimensions differ: {mu.dim} vs {nu.dim}")
    if args.delta < 0.0:
        raise ValidationError("--delta must be >= 0")
    problem = relaxation.RelaxedProblem(mu, nu, args.delta, ctilde, c)

    kind = None
    if ctilde.power == c.power == 1.0:
        kind = "order1"
    elif ctilde.power == c.power == 2.0:
        kind = "quadratic"
    if args.method == "closed" and kind is None:
        raise ValidationError("no closed form for this cost pair")
    use_closed = kind is not None and args.method in ("auto", "closed")
    if args.delta == 0.0 or use_closed:
        if args.delta == 0.0:
            sol = relaxation.solve_relaxed(problem)
        elif kind == "order1":
            sol = relaxation.solve_relaxed_order1(problem)
        else:
            sol = relaxation.solve_relaxed_quadratic(problem)
    else:
        sol = relaxation.solve_relaxed(problem)

    g0 = transport.solve_ot(
        mu, nu, costs.cost_matrix(ctilde, mu.points, nu.points)
    ).value
    if args.map:
        _write_map_csv(sol.map_points, mu.dim, args.map)
    print(f"G_delta {_fmt(sol.value)}")
    print(f"lambda_star {_fmt(sol.lambda_star)}")
    print(f"G_0 {_fmt(g0)}")


def _cmd_bound(args) -> None:
    inputs = _bound_inputs(args, args.n, args.delta)
    if args.grid:
        _bound_grid(args)
        return
    report = bounds.confidence_radius(inputs, refined=args.refined)
    print("# all reported values are upper bounds")
    print(f"epsilon {_fmt(report.epsilon)}")
    print(f"q {_fmt(report.penalty)}")
    print(f"radius {_fmt(report.radius)}")
    print(f"lambda_used {_fmt(report.lambda_used)}")
    if args.optimized:
        opt = bounds.optimized_cutoff_bound(
            args.n, args.rho, args.dim, _cube_lipschitz(args, report.lambda_used)
        )
        print(f"optimized_bound {_fmt(opt)}")


def _bound_inputs(args, n: int, delta: float) -> bounds.BoundInputs:
    if args.dim < 1:
        raise ValidationError("--dim must be >= 1")
    return bounds.BoundInputs.for_unit_cube(
        args.dim,
        n=n,
        rho=args.rho,
        zeta=args.zeta,
        k=args.k,
        delta=delta,
        lam=args.lam,
        lipschitz_ctilde=args.lipschitz_ctilde,
    )


def _cube_lipschitz(args, lam_used: float) -> float:
    diam = math.sqrt(args.dim)
    return lam_used * args.k * diam ** (args.k - 1.0) + args.lipschitz_ctilde


def _bound_grid(args) -> None:
    if not args.grid_values:
        raise ValidationError("--grid needs --grid-values")
    try:
        values = [float(v) for v in args.grid_values.split(",")]
    except ValueError:
        raise ValidationError("--grid-values must be comma-separated numbers") from None
    rows = []
    for v in values:
        if args.grid == "n":
            if v != int(v) or v < 1:
                raise ValidationError("n grid values must be positive integers")
            inputs = _bound_inputs(args, int(v), args.delta)
        else:
            inputs = _bound_inputs(args, args.n, v)
        report = bounds.confidence_radius(inputs, refined=args.refined)
        rows.append((v, report))
    out = open(args.grid_out, "w", encoding="utf-8", newline="") if args.grid_out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow([args.grid, "epsilon", "q", "radius", "lambda_used"])
        for v, report in rows:
            writer.writerow(
                [
                    int(v) if args.grid == "n" else format(v, ".17g"),
                    format(report.epsilon, ".17g"),
                    format(report.penalty, ".17g"),
                    format(report.radius, ".17g"),
                    format(report.lambda_used, ".17g"),
                ]
            )
    finally:
        if out is not sys.stdout:
            out.close()


def _cmd_experiment(args) -> None:
    base = (
        experiment.paper_scale_config()
        if args.preset == "paper"
        else experiment.desk_config()
    )
    config = experiment.load_config_json(args.config, base) if args.config else base
    if args.seed is not None:
        config = experiment.ExperimentConfig(
            **{**_config_dict(config), "seed": args.seed}
        )
    if config.seed is None:
        raise ValidationError("the experiment needs --seed or a seed in the config")
    if args.threads < 1:
        raise ValidationError("--threads must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = experiment.run_experiment(config, threads=args.threads)
    summary = experiment.summarize(rows)
    rows_path = out_dir / "rows.csv"
    summary_path = out_dir / "summary.csv"
    plot_path = out_dir / "plot.svg"
    experiment.write_rows_csv(rows, rows_path)
    experiment.write_summary_csv(summary, summary_path)
    experiment.emit_plot(summary, plot_path)
    print(f"rows_csv {rows_path}")
    print(f"summary_csv {summary_path}")
    print(f"plot_svg {plot_path}")


def _config_dict(config: experiment.ExperimentConfig) -> dict:
    from dataclasses import fields

    return {f.name: getattr(config, f.name) for f in fields(config)}


def _write_plan_csv(plan: transport.TransportPlan, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "mass"])
        for i, j in plan.support():
            writer.writerow([i, j, format(plan.mass[i, j], ".17g")])


def _write_map_csv(entries, dim: int, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y_idx", "w_idx"] + [f"x{j + 1}" for j in range(dim)] + ["mass"])
        for e in entries:
            writer.writerow(
                [e.y_idx, e.w_idx]
                + [format(x, ".17g") for x in np.asarray(e.x)]
                + [format(e.mass, ".17g")]
            )
