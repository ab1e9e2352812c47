"""Command-line front end: ``inexp-newton {generate,solve,bench,profile,rates}``.

Exit codes: 0 ok, 2 usage error, 3 generation failure, 4 non-convergence,
5 rate-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, rates
from .cave import CaveInstance, GenerationError, generate, start_point
from .newton import ForcingSchedule, SolverConfig, solve

EXIT_OK, EXIT_USAGE, EXIT_GENERATION, EXIT_NONCONVERGENCE, EXIT_RATES = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _int_list(text):
    try:
        values = [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("dimensions must be integers >= 2")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inexp-newton",
                                description="Inexact Newton method with feasible inexact projections.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random CAVE instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--density", type=float, default=bench.DEFAULT_DENSITY)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix; writes <out>.mtx and <out>.json")

    s = sub.add_parser("solve", help="solve a stored CAVE instance")
    s.add_argument("--instance", required=True, help="JSON sidecar or prefix")
    s.add_argument("--method", choices=("exp", "inexp"), default="inexp")
    s.add_argument("--theta", type=float, default=None,
                   help="projection tolerance (default 1e-8 for exp, 1e-1 for inexp)")
    s.add_argument("--eta-policy", choices=("bound", "constant", "vanishing", "residual-power"),
                   default="bound",
                   help="bound: constant schedule with eta just below its admissibility bound")
    s.add_argument("--eta", type=float, default=None, help="eta_bar (default from theta and Gamma)")
    s.add_argument("--mu", type=float, default=1.0)
    s.add_argument("--max-iter", type=_positive_int, default=bench.MAX_OUTER)
    s.add_argument("--tol", type=float, default=bench.RESIDUAL_TOL)
    s.add_argument("--projection", choices=("condg", "exact"), default="condg")
    s.add_argument("--trace-out", default=None)

    b = sub.add_parser("bench", help="compare exp and inexp on random instances")
    b.add_argument("--ns", type=_int_list, default=[200])
    b.add_argument("--count", type=_positive_int, default=20)
    b.add_argument("--density", type=float, default=bench.DEFAULT_DENSITY)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--reps", type=_positive_int, default=3)
    b.add_argument("--jobs", type=_positive_int, default=None,
                   help=f"worker processes (default ${bench.JOBS_ENV} or 1)")
    b.add_argument("--out-dir", default="bench_out")

    pr = sub.add_parser("profile", help="performance profiles from a bench CSV")
    pr.add_argument("--in", dest="input", required=True)
    pr.add_argument("--measure", choices=("time", "iterations"), default="iterations")
    pr.add_argument("--format", choices=("svg", "json"), default="svg")
    pr.add_argument("--out", default=None, help="output file (default stdout)")

    r = sub.add_parser("rates", help="check the convergence-rate signature of a forcing regime")
    r.add_argument("--regime", choices=("constant", "vanishing", "residual-power"), required=True)
    r.add_argument("--mu", type=float, default=1.0)
    r.add_argument("--problem", choices=rates.PROBLEMS, default="smooth")
    r.add_argument("--seed", type=int, default=0)
    return p


def cmd_generate(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if not 0 < args.density <= 1 or args.n * args.density < 1:
        raise UsageError("--density must lie in (0, 1] with n * density >= 1")
    try:
        inst = generate(args.n, args.density, args.seed)
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    mtx, meta = inst.save(args.out)
    print(f"wrote {mtx} and {meta}")
    print(f"sigma_min(A) = {inst.sigma.sigma_min:.12g}")
    print(f"d = {inst.d:.17g}")
    return EXIT_OK


def _schedule(policy, eta, theta, mu):
    if policy in ("bound", "constant"):
        return ForcingSchedule.constant(eta, theta)
    if policy == "vanishing":
        return ForcingSchedule.vanishing(eta, theta)
    return ForcingSchedule.residual_power(mu, eta, theta)


def cmd_solve(args) -> int:
    path = Path(args.instance)
    meta = path if path.suffix == ".json" else path.with_suffix(".json")
    if not meta.is_file():
        raise UsageError(f"instance file not found: {meta}")
    try:
        inst = CaveInstance.load(meta)
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot read instance: {exc}") from None
    theta = bench.DEFAULT_THETAS[args.method] if args.theta is None else args.theta
    if not 0 <= theta < 0.5:
        raise UsageError("--theta must lie in [0, 1/2)")
    if not 0 < args.mu <= 1:
        raise UsageError("--mu must lie in (0, 1]")
    if args.eta_policy == "constant" and args.eta is None:
        raise UsageError("--eta-policy constant needs --eta")
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    eta = bench.default_eta(theta, inst.gamma) if args.eta is None else args.eta
    if not 0 <= eta < 1:
        raise UsageError("--eta must lie in [0, 1)")
    config = SolverConfig(_schedule(args.eta_policy, eta, theta, args.mu), residual_tol=args.tol,
                          max_outer=args.max_iter, projection_mode=args.projection)
    trace = solve(inst, start_point(inst), config)
    print(f"status: {trace.status}")
    print(f"iterations: {trace.iterations}")
    print(f"residual: {trace.final_residual:.6e}")
    if trace.message:
        print(trace.message)
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_json() + "\n")
    return EXIT_OK if trace.converged else EXIT_NONCONVERGENCE


def cmd_bench(args) -> int:
    if not 0 < args.density <= 1:
        raise UsageError("--density must lie in (0, 1]")
    try:
        outcomes = bench.run_suite(args.ns, args.count, args.density, args.seed,
                                   reps=args.reps, jobs=args.jobs)
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_csv(outcomes, out / "outcomes.csv")
    bench.write_json(outcomes, out / "outcomes.json")
    rows = bench.summarize(outcomes)
    bench.write_summary_csv(rows, out / "summary.csv")
    table = bench.format_summary(rows)
    (out / "summary.txt").write_text(table + "\n")
    for measure in ("time", "iterations"):
        curves = bench.performance_profile(outcomes, measure)
        bench.write_svg(curves, out / f"profile_{measure}.svg", f"Performance profile ({measure})")
        bench.write_json(curves, out / f"profile_{measure}.json")
    print(table)
    print(f"results in {out}")
    return EXIT_OK if any(o.solved for o in outcomes) else EXIT_NONCONVERGENCE


def cmd_profile(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        outcomes = bench.read_csv(path)
        curves = bench.performance_profile(outcomes, args.measure)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if args.format == "svg":
        text = bench.render_svg(curves, f"Performance profile ({args.measure})")
    else:
        text = json.dumps([{"method": c.method, "solved_fraction": c.solved_fraction,
                            "breakpoints": c.breakpoints} for c in curves], indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rates(args) -> int:
    if not 0 < args.mu <= 1:
        raise UsageError("--mu must lie in (0, 1]")
    regime = args.regime.replace("-", "_")
    result = rates.run_regime(args.problem, regime, args.seed, args.mu)
    print(result.summary())
    print(f"order: {result.order:.6f}")
    print(f"contraction: {'yes' if result.contracting else 'no'}")
    print(f"signature: {'pass' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_RATES


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "bench": cmd_bench,
            "profile": cmd_profile, "rates": cmd_rates}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on malformed flags
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
