"""Strictly convex QP subsolver with a fixed Hessian factorization.

Solves

    minimize    1/2 x'Qx + c'x
    subject to  M x >= lower

where ``M`` stacks the general rows ``A``, the complementarity rows ``L``
and ``R`` and (when present) the finite box bounds as one-sided rows. Only
the linear term ``c`` changes between calls, so ``Q`` is factorized once
per workspace. Active-set changes update a QR factorization of
``inv(chol(Q)) * M_W'`` instead.

The first solve is a Goldfarb-Idnani dual active-set pass (no feasible
start point needed, proves infeasibility). Every later solve is a primal
active-set pass hot-started from the previous solution and working set,
which stay primal feasible because the polyhedron never changes.

Dual sign convention: ``Qx + c - M'y = 0`` with ``y >= 0``.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg import solve_triangular

from .problem import LcqpProblem

logger = logging.getLogger(__name__)

PRIMAL_TOL = 1e-10
DUAL_TOL = 1e-10
STATIONARITY_TOL = 1e-9
# relative size below which a direction counts as zero
_ZERO = 1e-14
_DEPENDENT = 1e-10


class QpError(RuntimeError):
    pass


class InfeasibleQp(QpError):
    """The constraint polyhedron is empty."""


class IterationLimit(QpError):
    pass


GENERAL = "GENERAL"
COMP_LEFT = "COMP_LEFT"
COMP_RIGHT = "COMP_RIGHT"
BOX_LOWER = "BOX_LOWER"
BOX_UPPER = "BOX_UPPER"


@dataclasses.dataclass(frozen=True)
class RowOrigin:
    kind: str
    index: int


@dataclasses.dataclass(frozen=True)
class StackedConstraints:
    """Rows ``[A; L; R; box]`` with lower bounds ``[b; 0; 0; box]``."""

    M: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_origin: tuple
    n_A: int
    n_C: int

    @classmethod
    def from_problem(cls, problem: LcqpProblem) -> "StackedConstraints":
        n = problem.n
        blocks = [problem.A, problem.L, problem.R]
        lower = [problem.b, np.zeros(problem.n_C), np.zeros(problem.n_C)]
        origin = (
            [RowOrigin(GENERAL, i) for i in range(problem.n_A)]
            + [RowOrigin(COMP_LEFT, i) for i in range(problem.n_C)]
            + [RowOrigin(COMP_RIGHT, i) for i in range(problem.n_C)]
        )
        eye = np.eye(n)
        lo = np.flatnonzero(np.isfinite(problem.lb))
        hi = np.flatnonzero(np.isfinite(problem.ub))
        if lo.size:
            blocks.append(eye[lo])
            lower.append(problem.lb[lo])
            origin += [RowOrigin(BOX_LOWER, int(j)) for j in lo]
        if hi.size:
            blocks.append(-eye[hi])
            lower.append(-problem.ub[hi])
            origin += [RowOrigin(BOX_UPPER, int(j)) for j in hi]
        M = np.vstack(blocks)
        lower = np.concatenate(lower)
        M.setflags(write=False)
        lower.setflags(write=False)
        return cls(M, lower, np.full(M.shape[0], np.inf), tuple(origin), problem.n_A, problem.n_C)

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def general(self) -> slice:
        return slice(0, self.n_A)

    @property
    def left(self) -> slice:
        return slice(self.n_A, self.n_A + self.n_C)

    @property
    def right(self) -> slice:
        return slice(self.n_A + self.n_C, self.n_A + 2 * self.n_C)

    @property
    def box(self) -> slice:
        return slice(self.n_A + 2 * self.n_C, self.m)

    def slack(self, x: np.ndarray) -> np.ndarray:
        return self.M @ x - self.lower


class QpWorkspace:
    """Hot-startable QP solver bound to one LCQP instance.

    Attributes of interest: ``active_set`` (stacked row indices held at
    their bound), ``factorization_count`` (from-scratch Hessian
    factorizations), ``active_set_changes`` (cumulative adds and drops),
    ``last_changes`` (adds and drops during the most recent solve).
    """

    def __init__(self, problem: LcqpProblem):
        self._setup(problem.Q, StackedConstraints.from_problem(problem), problem.hessian_factor)

    @classmethod
    def from_matrices(cls, Q, M, lower) -> "QpWorkspace":
        """Workspace for a plain QP ``min 1/2 x'Qx + c'x s.t. Mx >= lower``."""
        Q = np.array(Q, dtype=float)
        M = np.array(M, dtype=float).reshape(-1, Q.shape[0])
        lower = np.array(lower, dtype=float).ravel()
        cons = StackedConstraints(
            M, lower, np.full(M.shape[0], np.inf),
            tuple(RowOrigin(GENERAL, i) for i in range(M.shape[0])), M.shape[0], 0,
        )
        ws = cls.__new__(cls)
        ws._setup(Q, cons, None)
        return ws

    def _setup(self, Q, constraints, factor):
        self.Q = Q
        self._initial_factor = factor
        self.constraints = constraints
        self._row_norm = np.linalg.norm(self.constraints.M, axis=1)
        self.factorization_count = 0
        self.active_set_changes = 0
        self.refinement_count = 0
        self.last_changes = 0
        self.solve_count = 0
        self._factorize()

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.constraints.m

    def _factorize(self):
        # the problem caches its validation factor; a reset computes a fresh one
        if self.factorization_count == 0 and self._initial_factor is not None:
            self._chol = self._initial_factor
        else:
            self._chol = scipy.linalg.cholesky(self.Q, lower=True)
        self.factorization_count += 1
        self._clear_working_set()
        self.last_primal: Optional[np.ndarray] = None
        self.last_dual: Optional[np.ndarray] = None

    def reset(self):
        """Drop all hot-start state and refactorize the Hessian."""
        self._factorize()

    # -- working-set factorization -------------------------------------------

    def _clear_working_set(self):
        self.active_set: list[int] = []
        self._U = np.eye(self.n)
        self._R = np.zeros((self.n, 0))

    def _linv(self, v):
        return solve_triangular(self._chol, v, lower=True, check_finite=False)

    def _linv_t(self, v):
        return solve_triangular(self._chol, v, lower=True, trans="T", check_finite=False)

    def _try_add(self, i: int) -> bool:
        k = len(self.active_set)
        u = self._linv(self.constraints.M[i])
        if np.linalg.norm(self._U[:, k:].T @ u) <= _DEPENDENT * np.linalg.norm(u):
            return False
        self._U, self._R = scipy.linalg.qr_insert(
            self._U, self._R, u, k, which="col", check_finite=False
        )
        self.active_set.append(i)
        return True

    def _drop(self, pos: int):
        self._U, self._R = scipy.linalg.qr_delete(
            self._U, self._R, pos, 1, which="col", check_finite=False
        )
        del self.active_set[pos]

    def _multipliers(self, t_head: np.ndarray) -> np.ndarray:
        k = len(self.active_set)
        if k == 0:
            return np.zeros(0)
        return solve_triangular(self._R[:k, :k], t_head, lower=False, check_finite=False)

    def warm_start(self, x) -> bool:
        """Adopt ``x`` as hot-start point if it is feasible.

        The working set becomes a linearly independent subset of the rows
        active at ``x``. Returns False (state untouched) when ``x`` is
        infeasible.
        """
        x = np.array(x, dtype=float)
        slack = self.constraints.slack(x)
        scale = 1.0 + np.abs(self.constraints.lower)
        if np.any(slack < -PRIMAL_TOL * scale):
            return False
        self._clear_working_set()
        for i in np.flatnonzero(np.abs(slack) <= PRIMAL_TOL * scale):
            self._try_add(int(i))
        self.last_primal = x
        self.last_dual = None
        return True

    # -- solve -----------------------------------------------------------------

    def solve(self, c):
        """Minimize 1/2 x'Qx + c'x over the stacked polyhedron.

        Returns ``(x, y, status)`` with ``y`` in stacked row order.
        Raises InfeasibleQp or IterationLimit.
        """
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n,) or not np.all(np.isfinite(c)):
            raise ValueError("linear term must be a finite vector of length n")
        self.last_changes = 0
        cap = 50 * (self.n + self.m)
        if self.last_primal is None:
            x, yw = self._dual_active_set(c, cap)
        else:
            x, yw = self._primal_active_set(self.last_primal.copy(), c, cap)
        x, yw = self._refine(x, yw, c)
        y = np.zeros(self.m)
        y[self.active_set] = np.where(yw < 0, 0.0, yw)
        self.active_set_changes += self.last_changes
        self.solve_count += 1
        self.last_primal, self.last_dual = x, y
        return x.copy(), y, "optimal"

    def _refine(self, x, yw, c):
        """One extra equality-constrained step when the residual is loose."""
        k = len(self.active_set)
        M_W = self.constraints.M[self.active_set]
        resid = self.Q @ x + c - M_W.T @ yw
        if np.abs(resid).max() <= STATIONARITY_TOL * (1 + np.abs(c).max()):
            return x, yw
        t = self._U.T @ self._linv(self.Q @ x + c)
        p = -self._linv_t(self._U[:, k:] @ t[k:])
        x_new = x + p
        if np.all(self.constraints.slack(x_new) >= -PRIMAL_TOL * (1 + np.abs(self.constraints.lower))):
            x = x_new
            t = self._U.T @ self._linv(self.Q @ x + c)
        self.refinement_count += 1
        return x, self._multipliers(t[:k])

    def _dual_active_set(self, c, cap):
        cons = self.constraints
        M, lower = cons.M, cons.lower
        self._clear_working_set()
        x = -self._linv_t(self._linv(c))
        u = np.zeros(0)
        feas_scale = 1.0 + np.abs(lower)
        iterations = 0
        while True:
            slack = M @ x - lower
            violated = np.flatnonzero(slack < -PRIMAL_TOL * feas_scale)
            if violated.size == 0:
                return x, u
            scaled = slack[violated] / np.maximum(self._row_norm[violated], 1e-300)
            p = int(violated[np.argmin(scaled)])  # argmin returns least index on ties
            a_p = M[p]
            u_plus = np.append(u, 0.0)
            while True:
                iterations += 1
                if iterations > cap:
                    raise IterationLimit(f"dual active set exceeded {cap} iterations")
                k = len(self.active_set)
                v = self._linv(a_p)
                t = self._U.T @ v
                r = self._multipliers(t[:k])
                t1, drop = np.inf, None
                pos = np.flatnonzero(r > _ZERO * (1 + np.abs(r).max(initial=0.0)))
                if pos.size:
                    ratios = u_plus[pos] / r[pos]
                    j = int(np.argmin(ratios))
                    t1, drop = max(ratios[j], 0.0), int(pos[j])
                if np.linalg.norm(t[k:]) <= _DEPENDENT * np.linalg.norm(v):
                    t2 = np.inf
                    z = None
                else:
                    z = self._linv_t(self._U[:, k:] @ t[k:])
                    t2 = -(a_p @ x - lower[p]) / (z @ a_p)
                if np.isinf(t1) and np.isinf(t2):
                    raise InfeasibleQp("constraint polyhedron is empty")
                step = min(t1, t2)
                if z is not None:
                    x = x + step * z
                u_plus[:k] -= step * r
                u_plus[k] += step
                if t2 <= t1:
                    if not self._try_add(p):  # numerically dependent: treat as satisfied
                        u_plus = u_plus[:k]
                    else:
                        self.last_changes += 1
                    u = u_plus
                    break
                self._drop(drop)
                u_plus = np.delete(u_plus, drop)
                self.last_changes += 1

    def _primal_active_set(self, x, c, cap):
        cons = self.constraints
        M, lower = cons.M, cons.lower
        Q = self.Q
        at_minimizer = False
        degenerate = False
        for _ in range(cap):
            k = len(self.active_set)
            t = self._U.T @ self._linv(Q @ x + c)
            p = -self._linv_t(self._U[:, k:] @ t[k:])
            if at_minimizer or np.abs(p).max() <= _ZERO * (1 + np.abs(x).max()):
                y = self._multipliers(t[:k])
                if k == 0 or y.min() >= -DUAL_TOL * (1 + np.abs(y).max()):
                    return x, y
                neg = np.flatnonzero(y < -DUAL_TOL * (1 + np.abs(y).max()))
                if degenerate:
                    # least row index after a zero step guards against cycling
                    pos = int(neg[np.argmin(np.asarray(self.active_set)[neg])])
                else:
                    pos = int(neg[np.argmin(y[neg])])
                self._drop(pos)
                self.last_changes += 1
                at_minimizer = False
                continue
            Mp = M @ p
            inactive = np.ones(self.m, dtype=bool)
            inactive[self.active_set] = False
            pn = np.linalg.norm(p)
            blocking = np.flatnonzero(inactive & (Mp < -_ZERO * self._row_norm * pn))
            alpha, block = 1.0, None
            if blocking.size:
                slack = np.maximum(M[blocking] @ x - lower[blocking], 0.0)
                ratios = slack / -Mp[blocking]
                amin = ratios.min()
                if amin < 1.0:
                    tied = blocking[ratios <= amin * (1 + 1e-12)]
                    alpha, block = amin, tied
            if block is None:
                x = x + p
                at_minimizer = True
                degenerate = False
                continue
            x = x + alpha * p
            degenerate = alpha == 0.0
            at_minimizer = False
            for i in block:  # least index first
                if self._try_add(int(i)):
                    self.last_changes += 1
                    break
        raise IterationLimit(f"primal active set exceeded {cap} iterations")

    def kkt_residuals(self, x, y, c) -> dict:
        """Infinity-norm KKT residuals of the QP at ``(x, y)``."""
        slack = self.constraints.slack(x)
        return {
            "stationarity": float(np.abs(self.Q @ x + c - self.constraints.M.T @ y).max()),
            "primal": float(max(0.0, -slack.min())) if slack.size else 0.0,
            "dual": float(max(0.0, -y.min())) if y.size else 0.0,
            "complementarity": float(np.abs(y * slack).max()) if y.size else 0.0,
        }
