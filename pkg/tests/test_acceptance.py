"""Acceptance criteria, one test each.

Every test records a one-line verdict with the measured numbers, printed
in the terminal summary (and by ``python tests/test_acceptance.py``).
Thresholds are fixed; a criterion the method cannot meet stays red.
"""

import io
import math
import time

import numpy as np
import pytest

from lcqp.cli import RUN_COLUMNS, bench_run, read_bench_csv, run_bench, write_bench_csv
from lcqp.oracle import (
    branch_stationarity_gap,
    global_solve_by_enumeration,
    grid_line_search,
    grid_minimize_quadratic,
    random_convex_qp,
    random_lcqp,
    reference_qp_solve,
)
from lcqp.problem import PenaltyContext
from lcqp.qpsolver import QpWorkspace
from lcqp.solver import (
    SolverOptions,
    Status,
    optimal_step_length,
    solve,
    stationarity_residual,
    step_length_from_model,
)
from lcqp.transcription import optimal_initial_value

from conftest import make_corners
from kkt_points import constructed_kkt_point

VERDICTS = {}

CORNER_SEED = 1
BENCH_SEED = 0
RANDOM_SEED = 3


def record(number, ok, text):
    VERDICTS[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}"
    return ok


# -- shared runs -----------------------------------------------------------------

@pytest.fixture(scope="module")
def corner_runs():
    problem = make_corners()
    guesses = np.random.default_rng(CORNER_SEED).uniform(-2.0, 2.0, (100, 2))
    t0 = time.perf_counter()
    results = [solve(problem, x0=g) for g in guesses]
    return problem, guesses, results, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ivocp_runs():
    options = SolverOptions()
    x0_star = optimal_initial_value()
    t0 = time.perf_counter()
    runs = [bench_run(BENCH_SEED, 50, r, options, x0_star) for r in range(100)]
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def random_runs():
    rng = np.random.default_rng(RANDOM_SEED)
    problems = [random_lcqp(rng) for _ in range(200)]
    return [(p, solve(p)) for p in problems]


def _all_results(corner_runs, ivocp_runs, random_runs=()):
    out = [(corner_runs[0], r) for r in corner_runs[2]]
    out += [(res_problem, res) for res_problem, res in _ivocp_pairs(ivocp_runs)]
    out += list(random_runs)
    return out


def _ivocp_pairs(ivocp_runs):
    from lcqp.transcription import IvocpConfig, build_ivocp
    problem = build_ivocp(IvocpConfig(50)).problem
    return [(problem, result) for _, result in ivocp_runs[0]]


# -- criteria --------------------------------------------------------------------

def test_criterion_1_two_corners(corner_runs):
    problem, guesses, results, elapsed = corner_runs
    corners = np.array([[1.0, 0.0], [0.0, 1.0]])
    good = 0
    at_origin = 0
    for r in results:
        near = np.abs(corners - r.x).max(axis=1).min() <= 1e-6
        ok = (r.status is Status.STATIONARY_POINT and near and abs(r.objective + 1) <= 1e-8
              and r.phi <= 1e-10 and r.stationarity_certificate.holds)
        good += ok
        at_origin += np.abs(r.x).max() <= 1e-3
    ok = good == 100 and at_origin == 0 and elapsed < 1.0
    record(1, ok, f"{good}/100 runs reach a certified corner with objective -1, "
                  f"{at_origin} end near the origin, {elapsed:.2f} s")
    assert ok


def test_criterion_2_switched_ode_benchmark(ivocp_runs):
    runs, elapsed = ivocp_runs
    mean_phi = float(np.mean([rec.phi for rec, _ in runs]))
    mean_err = float(np.mean([rec.x0_error for rec, _ in runs]))
    ok = mean_phi <= 1e-10 and mean_err <= 0.05 and elapsed < 60
    record(2, ok, f"N=50: mean phi {mean_phi:.2e} (<= 1e-10), mean |x0 - x0*| {mean_err:.4f} (<= 0.05), "
                  f"{elapsed:.1f} s (< 60)")
    assert ok


def test_criterion_3_single_factorization(corner_runs, ivocp_runs):
    counts = [r.factorization_count for _, r in _all_results(corner_runs, ivocp_runs)]
    ok = all(c == 1 for c in counts)
    record(3, ok, f"factorization_count == 1 in {sum(c == 1 for c in counts)}/{len(counts)} solves")
    assert ok


def test_criterion_4_descent(corner_runs, ivocp_runs, random_runs):
    bad_ell, bad_merit, iters, worst_p = 0, 0, 0, 0.0
    for _, r in _all_results(corner_runs, ivocp_runs, random_runs):
        for it in r.trace.iterations:
            iters += 1
            if it.step_norm > 1e-12 and not it.ell < 0:
                bad_ell += 1
                worst_p = max(worst_p, it.step_norm)
            if it.merit > it.merit_before + 1e-12 * max(1.0, abs(it.merit_before)):
                bad_merit += 1
    ok = bad_ell == 0 and bad_merit == 0
    record(4, ok, f"{iters} iterations: {bad_ell} with ell >= 0 at |p| > 1e-12 "
                  f"(largest such |p| {worst_p:.1e}), {bad_merit} merit increases")
    assert ok


def test_criterion_5_line_search_oracle(random_runs):
    rng = np.random.default_rng(5)
    worst_model = 0.0
    for _ in range(1000):
        gamma = rng.uniform(1e-3, 10.0)
        delta = rng.uniform(-10.0, 10.0)
        ell = -gamma - rng.uniform(0.0, 10.0)  # QP steps satisfy ell <= -gamma
        a = step_length_from_model(gamma, delta, ell)
        worst_model = max(worst_model, abs(a - grid_minimize_quadratic(gamma + delta, ell, 1e-6)))

    worst_iter, used = 0.0, 0
    for problem, r in random_runs:
        for it in r.trace.iterations:
            if used == 100:
                break
            ctx = PenaltyContext(problem, it.rho)
            step = optimal_step_length(problem, ctx, it.x, it.x_star)
            # sampled merit values carry ~eps*|psi| rounding, so a grid fit
            # locates the minimum only to ~eps*|psi|/q; keep iterates where
            # that is below 1e-7
            if step.q < 1e-8 * (1.0 + abs(it.merit_before)):
                continue
            a = step.alpha
            g = grid_line_search(problem, ctx, it.x, it.x_star - it.x, 1e-6)
            worst_iter = max(worst_iter, abs(a - g))
            used += 1
    ok = worst_model <= 2e-6 and worst_iter <= 2e-6 and used == 100
    record(5, ok, f"max |alpha - grid| {worst_model:.1e} on 1000 triples, {worst_iter:.1e} on {used} iterates")
    assert ok


def test_criterion_6_fixed_point(corner_runs, ivocp_runs, random_runs):
    worst, count, over = 0.0, 0, 0
    for problem, r in _all_results(corner_runs, ivocp_runs, random_runs):
        tol = 10 * SolverOptions().tol_stationarity
        for o in r.trace.outer:
            ws = QpWorkspace(problem)
            x, _, _ = ws.solve(problem.g + o.rho * (problem.C @ o.x))
            d = float(np.abs(x - o.x).max())
            worst = max(worst, d)
            over += d > tol
            count += 1
    rng = np.random.default_rng(6)
    worst_kkt = 0.0
    for _ in range(50):
        rho = float(rng.uniform(0.01, 100.0))
        p, x, y = constructed_kkt_point(rng, rho)
        worst_kkt = max(worst_kkt, stationarity_residual(p, PenaltyContext(p, rho), x, y))
    ok = over == 0 and worst_kkt <= 1e-8
    record(6, ok, f"{count - over}/{count} outer iterates move <= 1e-7 on re-solve (worst {worst:.1e}); "
                  f"constructed KKT residual max {worst_kkt:.1e}")
    assert ok


def test_criterion_7_oracle_equivalence(random_runs):
    below, off_branch, worst_gap = 0, 0, 0.0
    for problem, r in random_runs:
        best = global_solve_by_enumeration(problem).objective
        below += r.objective < best - 1e-8
        gap = branch_stationarity_gap(problem, r.x)
        worst_gap = max(worst_gap, gap)
        off_branch += gap > 1e-6
    rng = np.random.default_rng(7)
    worst_qp = 0.0
    for _ in range(500):
        Q, c, M, lower = random_convex_qp(rng)
        x, _, _ = QpWorkspace.from_matrices(Q, M, lower).solve(c)
        worst_qp = max(worst_qp, float(np.abs(x - reference_qp_solve(Q, c, M, lower)[0]).max()))
    ok = below == 0 and off_branch == 0 and worst_qp <= 1e-8
    record(7, ok, f"200 instances: {below} below the global optimum, {off_branch} off-branch by > 1e-6 "
                  f"(worst {worst_gap:.1e}); 500 QPs max error {worst_qp:.1e}")
    assert ok


def test_criterion_8_determinism():
    texts = []
    for _ in range(2):
        buf = io.StringIO()
        write_bench_csv(run_bench([25], 5, 7, jobs=1), buf)
        texts.append(buf.getvalue())
    timing = RUN_COLUMNS.index("wall_ms")
    strip = lambda t: [[v for i, v in enumerate(l.split(",")) if i != timing] for l in t.splitlines()]
    schema_ok = all(
        math.isfinite(float(row["wall_ms"])) for t in texts for row in read_bench_csv(io.StringIO(t))
    )
    ok = strip(texts[0]) == strip(texts[1]) and schema_ok
    record(8, ok, "two seeded bench runs " + ("match" if ok else "differ") + " outside the timing column")
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
