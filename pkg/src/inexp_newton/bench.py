"""Batch experiments on random CAVEs: exact vs inexact projection.

Two methods are compared, both using CondG for the projection step:
``exp`` with ``theta = 1e-8`` and ``inexp`` with ``theta = 1e-1``.  For
each instance the linear forcing term is

    eta = 0.9999 (1 - sqrt(2 theta)) / (0.5 Gamma (1 + sqrt(2 theta))),

with ``Gamma = sigma_max(A) + 1``.  Results are summarized per dimension
(percentage solved, mean iterations, mean time) and compared with
Dolan-More performance profiles.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .cave import CaveInstance, generate, start_point
from .newton import ForcingSchedule, SolverConfig, eta_upper_bound, solve

CAVE_LAMBDA = 0.5  # ||V^{-1}|| <= 1 / (sigma_min(A) - 1) <= 1/2
ETA_SAFETY = 0.9999
DEFAULT_THETAS = {"exp": 1e-8, "inexp": 1e-1}
RESIDUAL_TOL = 1e-6
MAX_OUTER = 50
DEFAULT_DENSITY = 0.003
JOBS_ENV = "NEWTON_INEXP_JOBS"

CSV_COLUMNS = ("seed", "n", "method", "solved", "iterations", "time_s", "final_residual")


@dataclass(frozen=True)
class RunOutcome:
    instance_seed: int
    n: int
    method: str
    solved: bool
    iterations: int
    wall_time: float
    final_residual: float

    def csv_row(self) -> list[str]:
        return [str(self.instance_seed), str(self.n), self.method, str(int(self.solved)),
                str(self.iterations), repr(float(self.wall_time)), repr(float(self.final_residual))]


@dataclass(frozen=True)
class SummaryRow:
    n: int
    method: str
    runs: int
    percent_solved: float
    mean_iterations: float
    mean_time: float


@dataclass
class ProfileCurve:
    """Right-continuous step curve ``rho(tau)`` given by its breakpoints."""

    method: str
    breakpoints: list[tuple[float, float]]
    solved_fraction: float

    def rho(self, tau: float) -> float:
        value = 0.0
        for t, r in self.breakpoints:
            if t <= tau:
                value = r
            else:
                break
        return value


def default_eta(theta: float, gamma: float) -> float:
    """Forcing term used for both methods: 0.9999 times the admissibility bound with lambda = 1/2."""
    return ETA_SAFETY * eta_upper_bound(theta, gamma, CAVE_LAMBDA)


def method_config(inst: CaveInstance, theta: float, eta: float | None = None,
                  store_iterates: bool = False) -> SolverConfig:
    gamma = inst.gamma
    if eta is None:
        eta = default_eta(theta, gamma)
    return SolverConfig(ForcingSchedule.constant(eta, theta), residual_tol=RESIDUAL_TOL,
                        max_outer=MAX_OUTER, gamma_hint=gamma, lambda_hint=CAVE_LAMBDA,
                        store_iterates=store_iterates)


def run_method(inst: CaveInstance, method: str, theta: float, reps: int = 1) -> RunOutcome:
    """Solve one instance ``reps`` times; time is the median, the rest comes from the first run."""
    try:
        config = method_config(inst, theta)
        times = []
        trace = None
        for _ in range(max(reps, 1)):
            t = solve(inst, start_point(inst), config)
            trace = trace or t
            times.append(t.wall_time)
        return RunOutcome(inst.seed, inst.n, method, trace.converged, trace.iterations,
                          statistics.median(times), trace.final_residual)
    except (ArithmeticError, ValueError, RuntimeError):
        return RunOutcome(inst.seed, inst.n, method, False, 0, math.nan, math.nan)


def _run_instance(args) -> list[RunOutcome]:
    n, density, seed, thetas, reps = args
    inst = generate(n, density, seed)
    return [run_method(inst, m, th, reps) for m, th in thetas]


def default_jobs() -> int:
    try:
        return max(int(os.environ.get(JOBS_ENV, "1")), 1)
    except ValueError:
        return 1


def effective_density(n: int, density: float) -> float:
    return max(density, 1.0 / n)


def run_suite(ns, instances_per_n: int, density: float = DEFAULT_DENSITY, base_seed: int = 0,
              thetas: dict[str, float] | None = None, reps: int = 3,
              jobs: int | None = None) -> list[RunOutcome]:
    """Run every method on ``instances_per_n`` instances for each ``n``.

    Instance ``i`` uses seed ``base_seed + i``.  For small ``n`` the density
    is raised to ``1 / n`` so that every row keeps a nonzero.  With
    ``jobs > 1`` instances are spread over worker processes; results are
    merged in ``(n, seed, method)`` order, so only timings depend on ``jobs``.
    Generation failures propagate; solver failures become unsolved rows.
    """
    thetas = tuple((thetas or DEFAULT_THETAS).items())
    tasks = [(int(n), effective_density(n, density), base_seed + i, thetas, reps)
             for n in ns for i in range(instances_per_n)]
    jobs = default_jobs() if jobs is None else max(jobs, 1)
    if jobs == 1 or len(tasks) <= 1:
        batches = [_run_instance(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_instance, tasks))
    outcomes = [o for batch in batches for o in batch]
    order = {m: i for i, (m, _) in enumerate(thetas)}
    return sorted(outcomes, key=lambda o: (o.n, o.instance_seed, order.get(o.method, len(order))))


def summarize(outcomes) -> list[SummaryRow]:
    """One row per ``(n, method)``: percent solved, mean iterations and mean time.

    Means run over solved instances; a group with none solved reports nan.
    """
    groups: dict[tuple[int, str], list[RunOutcome]] = {}
    for o in outcomes:
        groups.setdefault((o.n, o.method), []).append(o)
    rows = []
    for (n, method), group in groups.items():
        solved = [o for o in group if o.solved]
        rows.append(SummaryRow(
            n, method, len(group), 100.0 * len(solved) / len(group),
            float(np.mean([o.iterations for o in solved])) if solved else math.nan,
            float(np.mean([o.wall_time for o in solved])) if solved else math.nan))
    return rows


def _measure(o: RunOutcome, measure: str) -> float:
    if measure == "time":
        return o.wall_time
    if measure == "iterations":
        return float(o.iterations)
    raise ValueError(f"unknown measure {measure!r}")


def performance_ratios(outcomes, measure: str = "iterations") -> dict[str, dict]:
    """Per-method map ``problem -> r_{p,s}``; unsolved runs get ``inf``.

    A problem is identified by ``(n, instance_seed)``.  If the best solved
    value on a problem is 0 (e.g. zero iterations), all values on that
    problem are shifted by 1 before dividing.
    """
    table: dict[str, dict] = {}
    for o in outcomes:
        table.setdefault(o.method, {})[(o.n, o.instance_seed)] = o
    problem_sets = {m: frozenset(v) for m, v in table.items()}
    if len(set(problem_sets.values())) > 1:
        raise ValueError("methods were run on different instance sets")
    problems = sorted(next(iter(problem_sets.values()), frozenset()))
    ratios: dict[str, dict] = {m: {} for m in table}
    for p in problems:
        values = {m: _measure(table[m][p], measure) for m in table if table[m][p].solved}
        values = {m: v for m, v in values.items() if math.isfinite(v)}
        best = min(values.values(), default=math.nan)
        shift = 1.0 if best == 0 else 0.0
        for m in table:
            if m in values:
                ratios[m][p] = (values[m] + shift) / (best + shift)
            else:
                ratios[m][p] = math.inf
    return ratios


def performance_profile(outcomes, measure: str = "iterations") -> list[ProfileCurve]:
    """Dolan-More profiles ``rho_s(tau) = |{p : r_{p,s} <= tau}| / P``."""
    ratios = performance_ratios(outcomes, measure)
    curves = []
    for method, by_problem in ratios.items():
        r = np.array(list(by_problem.values()), dtype=float)
        P = r.size
        finite = np.sort(r[np.isfinite(r)])
        taus = sorted(set([1.0] + finite.tolist()))
        points = [(float(t), float(np.count_nonzero(r <= t)) / P) for t in taus]
        curves.append(ProfileCurve(method, points, finite.size / P if P else 0.0))
    return curves


# output -----------------------------------------------------------------------

def write_csv(outcomes, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for o in outcomes:
            w.writerow(o.csv_row())
    return path


def read_csv(path) -> list[RunOutcome]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [RunOutcome(int(r["seed"]), int(r["n"]), r["method"], r["solved"] in ("1", "True", "true"),
                           int(r["iterations"]), float(r["time_s"]), float(r["final_residual"]))
                for r in reader]


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def write_json(obj, path) -> Path:
    """Write outcomes, summary rows or curves (lists of dataclasses) as JSON."""
    path = Path(path)
    data = []
    for item in obj:
        d = asdict(item)
        if isinstance(item, RunOutcome):
            d = dict(zip(CSV_COLUMNS, (item.instance_seed, item.n, item.method, item.solved,
                                       item.iterations, item.wall_time, item.final_residual)))
        data.append({k: _jsonable(v) for k, v in d.items()})
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    return path


def format_summary(rows) -> str:
    lines = [f"{'n':>6} {'method':>7} {'%':>6} {'Iter':>6} {'Time':>10}"]
    for r in rows:
        lines.append(f"{r.n:>6} {r.method:>7} {r.percent_solved:>6.1f} "
                     f"{r.mean_iterations:>6.2f} {r.mean_time:>10.4f}")
    return "\n".join(lines)


def write_summary_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(SummaryRow)])
        for r in rows:
            w.writerow([r.n, r.method, r.runs, repr(r.percent_solved),
                        repr(r.mean_iterations), repr(r.mean_time)])
    return path


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def render_svg(curves, title: str = "Performance profile", width: int = 480,
               height: int = 320) -> str:
    """Self-contained SVG step plot of profile curves over ``tau in [1, tau_max]``."""
    margin = 50
    finite = [t for c in curves for t, _ in c.breakpoints]
    tau_max = max(finite + [1.0])
    tau_max = tau_max * 1.1 if tau_max > 1.0 else 2.0
    pw, ph = width - 2 * margin, height - 2 * margin

    def sx(t):
        return margin + pw * (t - 1.0) / (tau_max - 1.0)

    def sy(r):
        return height - margin - ph * r

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<title>{escape(title)}</title>',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{margin}" y1="{sy(0):.2f}" x2="{width - margin}" y2="{sy(0):.2f}" stroke="black"/>',
           f'<line x1="{margin}" y1="{sy(0):.2f}" x2="{margin}" y2="{sy(1):.2f}" stroke="black"/>']
    for r in (0.0, 0.5, 1.0):
        out.append(f'<text x="{margin - 8}" y="{sy(r) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{r:.1f}</text>')
    for t in (1.0, (1.0 + tau_max) / 2, tau_max):
        out.append(f'<text x="{sx(t):.2f}" y="{height - margin + 16}" font-size="11" '
                   f'text-anchor="middle">{t:.2f}</text>')
    out.append(f'<text x="{width / 2:.2f}" y="{height - 10}" font-size="12" text-anchor="middle">tau</text>')
    out.append(f'<text x="{width / 2:.2f}" y="20" font-size="13" text-anchor="middle">{escape(title)}</text>')
    for i, c in enumerate(curves):
        color = _COLORS[i % len(_COLORS)]
        pts, prev = [], 0.0
        for t, r in c.breakpoints:
            pts.append(f"{sx(t):.2f},{sy(prev):.2f}")
            pts.append(f"{sx(t):.2f},{sy(r):.2f}")
            prev = r
        pts.append(f"{sx(tau_max):.2f},{sy(prev):.2f}")
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{width - margin + 4}" y="{margin + 14 * i:.2f}" font-size="11" '
                   f'fill="{color}">{escape(c.method)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(curves, path, title: str = "Performance profile") -> Path:
    path = Path(path)
    path.write_text(render_svg(curves, title))
    return path


def emit(obj, path, fmt: str) -> Path:
    """Write outcomes (csv/json), summary rows (csv/json) or curves (json/svg)."""
    items = list(obj)
    if fmt == "svg":
        return write_svg(items, path)
    if fmt == "json":
        return write_json(items, path)
    if fmt == "csv":
        if items and isinstance(items[0], SummaryRow):
            return write_summary_csv(items, path)
        if items and isinstance(items[0], ProfileCurve):
            raise ValueError("profile curves are emitted as json or svg")
        return write_csv(items, path)
    raise ValueError(f"unknown format {fmt!r}")
