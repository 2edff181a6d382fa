"""Command-line front end.

    lcqp solve PROBLEM.json [solver flags] [--x0 a,b,...] [--out REPORT.json]
    lcqp bench ivocp --N 25 50 --runs 100 --seed 7 --out bench.csv [--jobs J]
    lcqp check PROBLEM.json

Exit codes of ``solve``: 0 stationary point, 2 penalty or iteration
limit, 3 infeasible, 1 usage or parse error. Set ``LCQP_LOG`` to
``info`` or ``trace`` for solver progress on stderr.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time

import numpy as np

from .oracle import OracleCapExceeded, branch_stationarity_gap, global_solve_by_enumeration
from .problem import ParseError, ProblemError, load_problem
from .solver import InitMode, SolverOptions, Status, solve
from .transcription import (
    IvocpConfig,
    build_ivocp,
    extract_x0,
    optimal_initial_value,
    simulate,
    trajectory_rms,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LIMIT = 2
EXIT_INFEASIBLE = 3

_EXIT_FOR_STATUS = {
    Status.STATIONARY_POINT: EXIT_OK,
    Status.PENALTY_LIMIT: EXIT_LIMIT,
    Status.ITERATION_LIMIT: EXIT_LIMIT,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
}

BENCH_HEADER = "# lcqp-bench v1"
GUESS_RANGE = (-2.0, 2.0)
BRANCH_TOL = 1e-6

_LOG_LEVELS = {"off": None, "info": logging.INFO, "trace": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is taken by the limit statuses
    def error(self, message):
        raise UsageError(message)


@dataclasses.dataclass(frozen=True)
class RunRecord:
    instance: str
    seed: int
    N: int
    status: str
    objective: float
    phi: float
    stationarity: float
    x0_error: float
    inner: int
    outer: int
    factorization_count: int
    wall_ms: float
    traj_rms: float


RUN_COLUMNS = [f.name for f in dataclasses.fields(RunRecord)]


def configure_logging(env=None):
    level_name = (env if env is not None else os.environ.get("LCQP_LOG", "off")).strip().lower()
    if level_name not in _LOG_LEVELS:
        raise UsageError(f"LCQP_LOG must be one of {sorted(_LOG_LEVELS)}, got {level_name!r}")
    log = logging.getLogger("lcqp")
    level = _LOG_LEVELS[level_name]
    if level is None:
        log.setLevel(logging.CRITICAL + 1)
        return
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(level)


def _add_solver_flags(p):
    d = SolverOptions()
    p.add_argument("--rho0", type=float, default=d.rho0)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--tol-stat", type=float, default=d.tol_stationarity)
    p.add_argument("--tol-comp", type=float, default=d.tol_complementarity)
    p.add_argument("--rho-max", type=float, default=d.rho_max)
    p.add_argument("--max-inner", type=int, default=d.max_inner)
    p.add_argument("--init", choices=("qp0", "given"), default=None)


def _options(args) -> SolverOptions:
    mode = {None: None, "qp0": InitMode.ZERO_PENALTY_QP, "given": InitMode.GIVEN_X0}[args.init]
    try:
        return SolverOptions(
            rho0=args.rho0, beta=args.beta, tol_stationarity=args.tol_stat,
            tol_complementarity=args.tol_comp, rho_max=args.rho_max,
            max_inner=args.max_inner, init_mode=mode,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _parse_x0(text):
    if text is None:
        return None
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--x0 must be a comma-separated list of numbers, got {text!r}") from None


def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None


def _emit(report: dict, out):
    text = json.dumps(report, indent=2)
    if out is None:
        print(text)
        return
    try:
        with open(out, "w") as f:
            f.write(text + "\n")
    except OSError as e:
        raise OSError(f"cannot write report to {out}: {e.strerror}") from e


def _load(path):
    try:
        return load_problem(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except (ParseError, ProblemError) as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_solve(args) -> int:
    problem = _load(args.path)
    options = _options(args)
    x0 = _parse_x0(args.x0)
    if x0 is not None and x0.shape != (problem.n,):
        raise UsageError(f"--x0 has {x0.size} entries, problem has n = {problem.n}")
    try:
        t0 = time.perf_counter()
        result = solve(problem, options, x0=x0)
        wall_ms = 1e3 * (time.perf_counter() - t0)
    except ValueError as e:
        raise UsageError(str(e)) from None

    cert = result.stationarity_certificate
    report = {
        "status": result.status.value,
        "objective": _finite_or_none(result.objective),
        "phi": _finite_or_none(result.phi),
        "stationarity": _finite_or_none(result.stationarity),
        "final_rho": result.final_rho,
        "x": result.x.tolist(),
        "y": result.y.tolist(),
        "y_A": result.y_A.tolist(),
        "y_L": result.y_L.tolist(),
        "y_R": result.y_R.tolist(),
        "y_box": result.y_box.tolist(),
        "strongly_stationary": None if cert is None else cert.holds,
        "violated_conditions": [] if cert is None else list(cert.violated_conditions),
        "trace": {
            "outer_iterations": result.trace.outer_iterations,
            "inner_iterations": result.trace.inner_iterations,
            "factorization_count": result.factorization_count,
            "wall_ms": wall_ms,
        },
    }
    _emit(report, args.out)
    return _EXIT_FOR_STATUS[result.status]


def run_seed(seed: int, N: int, run: int) -> np.random.SeedSequence:
    """Independent stream per (N, run), derived only from the user seed."""
    return np.random.SeedSequence([seed, N, run])


def bench_run(seed: int, N: int, run: int, options: SolverOptions, x0_star: float):
    """One benchmark solve; returns the RunRecord and the full solver result."""
    instance = build_ivocp(IvocpConfig(N))
    guess = np.random.default_rng(run_seed(seed, N, run)).uniform(*GUESS_RANGE)
    start = simulate(instance, guess)
    t0 = time.perf_counter()
    result = solve(instance.problem, options, x0=start)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    record = RunRecord(
        instance=f"ivocp-N{N}-r{run:03d}",
        seed=seed,
        N=N,
        status=result.status.value,
        objective=result.objective + instance.objective_offset,
        phi=result.phi,
        stationarity=result.stationarity,
        x0_error=abs(extract_x0(result, instance.index) - x0_star),
        inner=result.trace.inner_iterations,
        outer=result.trace.outer_iterations,
        factorization_count=result.factorization_count,
        wall_ms=wall_ms,
        traj_rms=trajectory_rms(result, instance, x0_star),
    )
    return record, result


def bench_one(seed: int, N: int, run: int, options: SolverOptions, x0_star: float) -> RunRecord:
    return bench_run(seed, N, run, options, x0_star)[0]


def _bench_task(task):
    return bench_one(*task)


def run_bench(Ns, runs, seed, options=None, jobs=1) -> list[RunRecord]:
    options = options or SolverOptions()
    x0_star = optimal_initial_value()
    tasks = [(seed, N, r, options, x0_star) for N in Ns for r in range(runs)]
    if jobs <= 1:
        return [_bench_task(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order whatever the completion order
        return list(pool.map(_bench_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_bench_csv(records, f):
    f.write(BENCH_HEADER + "\n")
    w = csv.writer(f, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for rec in records:
        w.writerow([_fmt(getattr(rec, c)) for c in RUN_COLUMNS])


def read_bench_csv(f) -> list[dict]:
    header = f.readline().rstrip("\n")
    if header != BENCH_HEADER:
        raise ValueError(f"not an lcqp benchmark file (first line {header!r})")
    return list(csv.DictReader(f))


def aggregate(records) -> list[dict]:
    rows = []
    for N in sorted({r.N for r in records}):
        rs = [r for r in records if r.N == N]
        rows.append({
            "N": N,
            "runs": len(rs),
            "stationary": sum(r.status == Status.STATIONARY_POINT.value for r in rs),
            "mean_phi": float(np.mean([r.phi for r in rs])),
            "mean_x0_error": float(np.mean([r.x0_error for r in rs])),
            "mean_traj_rms": float(np.mean([r.traj_rms for r in rs])),
            "mean_wall_ms": float(np.mean([r.wall_ms for r in rs])),
        })
    return rows


def format_aggregate(rows) -> str:
    out = io.StringIO()
    out.write(f"{'N':>5} {'runs':>5} {'stat':>5} {'mean phi':>11} {'mean |x0-x0*|':>14} "
              f"{'mean rms':>10} {'mean ms':>9}\n")
    for r in rows:
        out.write(f"{r['N']:>5} {r['runs']:>5} {r['stationary']:>5} {r['mean_phi']:>11.3e} "
                  f"{r['mean_x0_error']:>14.5f} {r['mean_traj_rms']:>10.5f} {r['mean_wall_ms']:>9.2f}\n")
    return out.getvalue()


def cmd_bench(args) -> int:
    if args.problem != "ivocp":
        raise UsageError(f"unknown benchmark {args.problem!r}")
    if args.runs < 1 or any(N < 2 for N in args.N):
        raise UsageError("--runs must be >= 1 and every --N >= 2")
    options = _options(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    records = run_bench(args.N, args.runs, args.seed, options, jobs)
    if args.out is None:
        write_bench_csv(records, sys.stdout)
    else:
        try:
            with open(args.out, "w", newline="") as f:
                write_bench_csv(records, f)
        except OSError as e:
            raise OSError(f"cannot write benchmark CSV to {args.out}: {e.strerror}") from e
    sys.stderr.write(format_aggregate(aggregate(records)))
    return EXIT_OK


def cmd_check(args) -> int:
    problem = _load(args.path)
    try:
        oracle = global_solve_by_enumeration(problem)
    except OracleCapExceeded as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    result = solve(problem, _options(args))
    gap = result.objective - oracle.objective
    branch_gap = branch_stationarity_gap(problem, result.x)
    report = {
        "status": result.status.value,
        "solver_objective": result.objective,
        "oracle_objective": oracle.objective,
        "oracle_branch": list(oracle.assignment),
        "gap": gap,
        "branch_gap": _finite_or_none(branch_gap),
        "branch_stationary": bool(branch_gap <= BRANCH_TOL),
        "strongly_stationary": None if result.stationarity_certificate is None
        else result.stationarity_certificate.holds,
    }
    _emit(report, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lcqp", description="LCQP solver by penalty homotopy and sequential convex programming")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a problem file and print a JSON report")
    p.add_argument("path")
    _add_solver_flags(p)
    p.add_argument("--x0", help="comma-separated initial guess")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run the switched-ODE optimal control benchmark")
    p.add_argument("problem", choices=("ivocp",))
    p.add_argument("--N", type=int, nargs="+", default=[50])
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="compare the solver against branch enumeration")
    p.add_argument("path")
    p.add_argument("--out")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    try:
        configure_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"usage error: {e}\n")
        return EXIT_USAGE
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
