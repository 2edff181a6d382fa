"""Brute-force reference solvers for small instances.

Everything here is deliberately naive: exhaustive active-set enumeration
with dense KKT solves, complementarity-branch enumeration and grid
sampling. Nothing in this module calls into :mod:`lcqp.qpsolver` or
:mod:`lcqp.solver`, so it can be used to check them.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Optional, Sequence

import numpy as np

from .problem import LcqpProblem, PenaltyContext, merit

MAX_BRANCH_PAIRS = 12
LEFT_ZERO = "LEFT_ZERO"
RIGHT_ZERO = "RIGHT_ZERO"


class Infeasible(RuntimeError):
    pass


class AllBranchesInfeasible(Infeasible):
    pass


class OracleCapExceeded(ValueError):
    pass


def _kkt_candidate(Q, c, E, e, G, lo):
    """Solve min 1/2x'Qx + c'x s.t. Ex = e, Gx = lo (both as equalities)."""
    n = Q.shape[0]
    B = np.vstack([E, G])
    k = B.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = Q
    K[:n, n:] = -B.T
    K[n:, :n] = B
    rhs = np.concatenate([-c, e, lo])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None, None
    if not np.all(np.isfinite(sol)):
        return None, None
    return sol[:n], sol[n:]


def reference_qp_solve(Q, c, M, lower, E=None, e=None, tol: float = 1e-9):
    """Minimize 1/2 x'Qx + c'x s.t. Mx >= lower (and Ex = e).

    Enumerates subsets of the inequality rows in order of increasing size
    and returns the first candidate that satisfies every KKT condition.
    Returns ``(x, y)`` with ``y`` the inequality multipliers (``Qx + c -
    M'y - E'w = 0``). Raises :class:`Infeasible` if no subset works.
    """
    Q = np.asarray(Q, float)
    c = np.asarray(c, float)
    n = Q.shape[0]
    M = np.asarray(M, float).reshape(-1, n)
    lower = np.asarray(lower, float).ravel()
    E = np.zeros((0, n)) if E is None else np.asarray(E, float).reshape(-1, n)
    e = np.zeros(0) if e is None else np.asarray(e, float).ravel()
    m = M.shape[0]
    scale = 1.0 + np.abs(c).max() + np.abs(lower).max(initial=0.0)
    for size in range(0, min(m, n - E.shape[0]) + 1):
        for subset in itertools.combinations(range(m), size):
            idx = list(subset)
            x, mult = _kkt_candidate(Q, c, E, e, M[idx], lower[idx])
            if x is None:
                continue
            y_sub = mult[E.shape[0]:]
            if y_sub.size and y_sub.min() < -tol * scale:
                continue
            if m and (M @ x - lower).min() < -tol * scale:
                continue
            if E.shape[0] and np.abs(E @ x - e).max() > tol * scale:
                continue
            resid = Q @ x + c - M[idx].T @ y_sub - E.T @ mult[: E.shape[0]]
            if np.abs(resid).max() > tol * scale:
                continue
            y = np.zeros(m)
            y[idx] = y_sub
            return x, y
    raise Infeasible("no active subset satisfies the KKT conditions")


def _inequalities(problem: LcqpProblem):
    n = problem.n
    rows = [problem.A, problem.L, problem.R]
    lower = [problem.b, np.zeros(problem.n_C), np.zeros(problem.n_C)]
    eye = np.eye(n)
    lo = np.isfinite(problem.lb)
    hi = np.isfinite(problem.ub)
    rows += [eye[lo], -eye[hi]]
    lower += [problem.lb[lo], -problem.ub[hi]]
    return np.vstack(rows), np.concatenate(lower)


@dataclasses.dataclass
class BranchReport:
    assignment: tuple
    feasible: bool
    x: Optional[np.ndarray] = None
    objective: float = np.inf


@dataclasses.dataclass
class GlobalSolution:
    x: np.ndarray
    objective: float
    assignment: tuple
    branches: list


def solve_branch(problem: LcqpProblem, assignment: Sequence[str]):
    """Convex QP with the chosen side of every pair pinned to zero."""
    M, lower = _inequalities(problem)
    E = np.array([problem.L[i] if tag == LEFT_ZERO else problem.R[i] for i, tag in enumerate(assignment)])
    return reference_qp_solve(problem.Q, problem.g, M, lower, E=E, e=np.zeros(len(assignment)))


def global_solve_by_enumeration(problem: LcqpProblem) -> GlobalSolution:
    """Global LCQP minimum over all 2**n_C complementarity branches.

    Branches are visited in lexicographic tag order and only a strictly
    better objective replaces the incumbent, so ties resolve to the
    lexicographically smallest branch.
    """
    if problem.n_C > MAX_BRANCH_PAIRS:
        raise OracleCapExceeded(f"n_C = {problem.n_C} exceeds the enumeration cap {MAX_BRANCH_PAIRS}")
    reports = []
    best = None
    for assignment in itertools.product((LEFT_ZERO, RIGHT_ZERO), repeat=problem.n_C):
        try:
            x, _ = solve_branch(problem, assignment)
        except Infeasible:
            reports.append(BranchReport(assignment, False))
            continue
        f = float(0.5 * x @ problem.Q @ x + problem.g @ x)
        reports.append(BranchReport(assignment, True, x, f))
        if best is None or f < best.objective:
            best = reports[-1]
    if best is None:
        raise AllBranchesInfeasible("every complementarity branch is infeasible")
    return GlobalSolution(best.x, best.objective, best.assignment, reports)


def branch_stationarity_gap(problem: LcqpProblem, x, activity_tol: float = 1e-6) -> float:
    """Distance from ``x`` to the minimizer of the branch ``x`` lies on.

    Each pair is pinned on the side that is (numerically) zero at ``x``;
    weakly active pairs try both sides and a pair with neither side
    within ``activity_tol`` is pinned on its smaller side. Returns the
    smallest infinity-norm distance over the compatible branches.
    """
    x = np.asarray(x, float)
    Lx, Rx = problem.L @ x, problem.R @ x
    choices = []
    for i in range(problem.n_C):
        opts = []
        if abs(Lx[i]) <= activity_tol:
            opts.append(LEFT_ZERO)
        if abs(Rx[i]) <= activity_tol:
            opts.append(RIGHT_ZERO)
        if not opts:
            opts.append(LEFT_ZERO if Lx[i] <= Rx[i] else RIGHT_ZERO)
        choices.append(opts)
    best = np.inf
    for assignment in itertools.product(*choices):
        try:
            xb, _ = solve_branch(problem, assignment)
        except Infeasible:
            continue
        best = min(best, float(np.abs(xb - x).max()))
    return best


def grid_line_search(problem: LcqpProblem, ctx: PenaltyContext, x, p, resolution: float) -> float:
    """Least grid point in {0, res, 2 res, ..., 1} minimizing psi(x + a p)."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    alphas = np.append(np.arange(0.0, 1.0, resolution), 1.0)
    # psi is quadratic in alpha; evaluate its coefficients by brute force
    f0 = merit(problem, ctx, x)
    f1 = merit(problem, ctx, x + p)
    fm = merit(problem, ctx, x - p)
    a2 = 0.5 * (f1 + fm) - f0
    a1 = 0.5 * (f1 - fm)
    # leave out the constant f0: near a flat minimum, adding it would round
    # away differences far larger than the grid spacing needs
    values = a2 * alphas**2 + a1 * alphas
    return float(alphas[int(np.argmin(values))])


def grid_minimize_quadratic(q: float, ell: float, resolution: float) -> float:
    """Least grid point in [0, 1] minimizing 1/2 a^2 q + a ell."""
    alphas = np.append(np.arange(0.0, 1.0, resolution), 1.0)
    values = 0.5 * alphas**2 * q + alphas * ell
    return float(alphas[int(np.argmin(values))])


def random_lcqp(rng: np.random.Generator, n: int = None, n_C: int = None, n_A: int = None) -> LcqpProblem:
    """Random instance that is feasible by construction (origin feasible).

    Q = D'D + I with Gaussian D; b <= 0 so that x = 0 satisfies every row.
    """
    n = int(rng.integers(2, 7)) if n is None else n
    n_C = int(rng.integers(1, min(3, n) + 1)) if n_C is None else n_C
    n_A = int(rng.integers(0, 4)) if n_A is None else n_A
    D = rng.standard_normal((n, n))
    Q = D.T @ D + np.eye(n)
    Q = 0.5 * (Q + Q.T)
    return LcqpProblem(
        Q=Q,
        g=rng.standard_normal(n) * 3,
        L=rng.standard_normal((n_C, n)),
        R=rng.standard_normal((n_C, n)),
        A=rng.standard_normal((n_A, n)),
        b=-rng.uniform(0.0, 2.0, n_A),
    )


def random_convex_qp(rng: np.random.Generator, n: int = None, m: int = None):
    """Random strictly convex QP ``(Q, c, M, lower)`` feasible at a random point."""
    n = int(rng.integers(1, 9)) if n is None else n
    m = int(rng.integers(0, 13)) if m is None else m
    D = rng.standard_normal((n, n))
    Q = D.T @ D + 0.5 * np.eye(n)
    Q = 0.5 * (Q + Q.T)
    M = rng.standard_normal((m, n))
    x_feas = rng.standard_normal(n)
    lower = M @ x_feas - rng.uniform(0.0, 1.0, m)
    c = rng.standard_normal(n) * 3
    return Q, c, M, lower
