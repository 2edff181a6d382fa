"""Constructed KKT points of the penalized problem, used by several tests."""

import numpy as np

from lcqp.problem import LcqpProblem
from lcqp.qpsolver import StackedConstraints


def constructed_kkt_point(rng, rho, n=5, n_C=2, n_A=2):
    """Problem, x, y with (Q + rho C) x + g = M'y exactly by construction.

    Each pair is left-active, right-active or biactive at ``x`` and the
    opposite side is strictly positive, so ``x`` is LCQP feasible.
    """
    x = rng.standard_normal(n)
    proj = lambda v: v - (v @ x) / (x @ x) * x
    L = rng.standard_normal((n_C, n))
    R = rng.standard_normal((n_C, n))
    for i in range(n_C):
        kind = rng.integers(3)
        if kind in (0, 2):
            L[i] = proj(L[i])
        else:
            L[i] += (1 + abs(L[i] @ x) - L[i] @ x) / (x @ x) * x
        if kind in (1, 2):
            R[i] = proj(R[i])
        else:
            R[i] += (1 + abs(R[i] @ x) - R[i] @ x) / (x @ x) * x
    A = rng.standard_normal((n_A, n))
    active_A = rng.random(n_A) < 0.5
    b = A @ x - np.where(active_A, 0.0, rng.uniform(0.5, 1.0, n_A))
    D = rng.standard_normal((n, n))
    Q = D.T @ D + np.eye(n)
    p = LcqpProblem(Q=Q, g=np.zeros(n), L=L, R=R, A=A, b=b)
    cons = StackedConstraints.from_problem(p)
    slack = cons.slack(x)
    y = np.where(np.abs(slack) <= 1e-12, rng.uniform(0.1, 2.0, cons.m), 0.0)
    g = cons.M.T @ y - (Q + rho * p.C) @ x
    return LcqpProblem(Q=Q, g=g, L=L, R=R, A=A, b=b), x, y
