"""Penalty homotopy with sequential convex programming for LCQPs.

Outer loop: the complementarity product is moved into the objective with
weight ``rho``, and ``rho`` grows geometrically until complementarity
holds. Inner loop: the (indefinite) penalty term is linearized at the
current iterate, giving a convex QP with the fixed Hessian ``Q`` and
linear term ``g + rho * C x``. Its minimizer defines a step along which
the exact merit function is minimized in closed form.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from typing import Optional

import numpy as np

from .problem import (
    LcqpProblem,
    PenaltyContext,
    complementarity_residual,
    merit,
    objective,
)
from .qpsolver import InfeasibleQp, IterationLimit, QpWorkspace, StackedConstraints

logger = logging.getLogger(__name__)

ACTIVITY_TOL = 1e-6
_ZERO_STEP = 1e-14


class Status(str, enum.Enum):
    STATIONARY_POINT = "STATIONARY_POINT"
    PENALTY_LIMIT = "PENALTY_LIMIT"
    ITERATION_LIMIT = "ITERATION_LIMIT"
    INFEASIBLE = "INFEASIBLE"


class InitMode(str, enum.Enum):
    ZERO_PENALTY_QP = "ZERO_PENALTY_QP"
    GIVEN_X0 = "GIVEN_X0"


class NotFeasible(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    rho0: float = 0.01
    beta: float = 2.0
    tol_stationarity: float = 1e-8
    tol_complementarity: float = 1e-10
    rho_max: float = 1e8
    max_inner: int = 500
    init_mode: Optional[InitMode] = None  # None: GIVEN_X0 iff an x0 is supplied

    def __post_init__(self):
        if not (self.rho0 > 0 and math.isfinite(self.rho0)):
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta}")
        if not (self.tol_stationarity > 0 and self.tol_complementarity > 0):
            raise ValueError("tolerances must be positive")
        if not self.rho_max > self.rho0:
            raise ValueError("rho_max must exceed rho0")
        if not (isinstance(self.max_inner, int) and self.max_inner >= 1):
            raise ValueError("max_inner must be a positive integer")
        if self.init_mode is not None:
            object.__setattr__(self, "init_mode", InitMode(self.init_mode))


@dataclasses.dataclass
class IterationRecord:
    k: int
    j: int
    rho: float
    alpha: float
    merit_before: float
    merit: float
    stationarity: float
    phi: float
    active_set_changes: int
    wall_time: float
    # line-search ingredients, kept for the descent checks
    gamma: float
    delta: float
    ell: float
    ell_used: float
    step_norm: float
    x: Optional[np.ndarray] = None  # iterate the model was built at
    x_star: Optional[np.ndarray] = None  # minimizer of that model


@dataclasses.dataclass
class OuterRecord:
    k: int
    rho: float
    x: np.ndarray
    y: np.ndarray
    inner_iterations: int
    stationarity: float
    phi: float


@dataclasses.dataclass
class SolveTrace:
    iterations: list = dataclasses.field(default_factory=list)
    outer: list = dataclasses.field(default_factory=list)
    factorization_count: int = 0

    @property
    def inner_iterations(self) -> int:
        return len(self.iterations)

    @property
    def outer_iterations(self) -> int:
        return len(self.outer)


@dataclasses.dataclass(frozen=True)
class StationaritySets:
    left: frozenset
    right: frozenset
    weak: frozenset
    left_strong: frozenset
    right_strong: frozenset
    activity_tol: float


@dataclasses.dataclass
class StationarityCertificate:
    holds: bool
    violated_conditions: list
    sets: Optional[StationaritySets]
    multipliers: Optional[np.ndarray] = None


@dataclasses.dataclass
class SolverResult:
    x: np.ndarray
    y: np.ndarray
    status: Status
    stationarity_certificate: Optional[StationarityCertificate]
    final_rho: float
    objective: float
    phi: float
    stationarity: float
    trace: SolveTrace
    constraints: StackedConstraints

    @property
    def y_A(self) -> np.ndarray:
        return self.y[self.constraints.general]

    @property
    def y_L(self) -> np.ndarray:
        return self.y[self.constraints.left]

    @property
    def y_R(self) -> np.ndarray:
        return self.y[self.constraints.right]

    @property
    def y_box(self) -> np.ndarray:
        return self.y[self.constraints.box]

    @property
    def factorization_count(self) -> int:
        return self.trace.factorization_count


@dataclasses.dataclass(frozen=True)
class StepLength:
    alpha: float
    gamma: float
    delta: float
    q: float
    ell: float
    # slope actually used for alpha; differs from ell only when rounding
    # pushed ell above its exact-arithmetic bound -gamma
    ell_used: float


def step_length_from_model(gamma: float, delta: float, ell: float) -> float:
    """Minimizer over [0, 1] of ``1/2 a^2 (gamma + delta) + a ell``.

    ``gamma > 0`` is the convex curvature; when the penalty curvature
    ``delta`` is not positive the model decreases along the whole
    interval (``ell < 0``) and the full step is taken.
    """
    if delta > 0:
        return min(max(-ell / (gamma + delta), 0.0), 1.0)
    return 1.0


def optimal_step_length(problem: LcqpProblem, ctx: PenaltyContext, x, x_star) -> StepLength:
    """Exact minimizer over [0, 1] of the merit function along x -> x_star.

    Along ``x + a p`` the merit is ``1/2 a^2 q + a ell + psi(x)`` with
    ``q = p'Qp + rho p'Cp``. ``x_star`` must be the minimizer of the
    convex model at ``x``; that guarantees ``ell <= -p'Qp`` for feasible
    ``x``, and the bound is enforced against rounding before ``alpha``
    is formed.
    """
    x = np.asarray(x, float)
    p = np.asarray(x_star, float) - x
    Qp = problem.Q @ p
    Cp = ctx.C @ p
    gamma = float(p @ Qp)
    delta = float(ctx.rho * (p @ Cp))
    q = gamma + delta
    ell = float(x @ Qp + ctx.rho * (x @ Cp) + problem.g @ p)
    # once p is ~1e-8 the computed ell is dominated by the 1e-16 slack
    # errors of x and x_star times O(1) multipliers and can turn positive
    ell_used = min(ell, -gamma)
    if not p.size or np.abs(p).max() <= _ZERO_STEP:
        alpha = 0.0
    else:
        alpha = step_length_from_model(gamma, delta, ell_used)
    return StepLength(alpha, gamma, delta, q, ell, ell_used)


def stationarity_residual(problem: LcqpProblem, ctx: PenaltyContext, x, y, constraints=None) -> float:
    """Infinity-norm KKT residual of the penalized problem at ``(x, y)``."""
    cons = constraints or StackedConstraints.from_problem(problem)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slack = cons.slack(x)
    grad = problem.Q @ x + ctx.rho * (ctx.C @ x) + problem.g - cons.M.T @ y
    parts = [
        np.abs(grad).max(),
        max(0.0, -slack.min(initial=0.0)),
        max(0.0, -y.min(initial=0.0)),
        np.abs(y * slack).max(initial=0.0),
    ]
    return float(max(parts))


def lcqp_multipliers(problem: LcqpProblem, x, y, rho: float, constraints=None) -> np.ndarray:
    """Map duals of the penalized problem to LCQP multipliers.

    The penalty gradient ``rho (L'Rx + R'Lx)`` is absorbed into the
    complementarity rows: ``y_L - rho Rx`` and ``y_R - rho Lx``.
    """
    cons = constraints or StackedConstraints.from_problem(problem)
    out = np.array(y, dtype=float)
    out[cons.left] -= rho * (problem.R @ x)
    out[cons.right] -= rho * (problem.L @ x)
    return out


def stationarity_sets(problem: LcqpProblem, x, activity_tol: float = ACTIVITY_TOL) -> StationaritySets:
    Lx, Rx = problem.L @ x, problem.R @ x
    left = frozenset(np.flatnonzero(np.abs(Lx) <= activity_tol).tolist())
    right = frozenset(np.flatnonzero(np.abs(Rx) <= activity_tol).tolist())
    weak = left & right
    return StationaritySets(left, right, weak, left - weak, right - weak, activity_tol)


def check_strong_stationarity(problem: LcqpProblem, x, y, activity_tol: float = ACTIVITY_TOL,
                              constraints=None) -> StationarityCertificate:
    """Itemized strong-stationarity test for LCQP multipliers ``y``.

    ``y`` is in stacked row order ``[y_A, y_L, y_R, y_box]`` with the
    convention ``Qx + g - A'y_A - L'y_L - R'y_R - (box) = 0``. Raises
    NotFeasible when ``x`` is not LCQP feasible within ``activity_tol``.
    """
    cons = constraints or StackedConstraints.from_problem(problem)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if y.shape != (cons.m,):
        raise ValueError(f"y must have length {cons.m}")
    slack = cons.slack(x)
    if slack.size and slack.min() < -activity_tol:
        raise NotFeasible(f"constraint violation {-slack.min():.3g} exceeds {activity_tol:g}")
    phi = complementarity_residual(problem, x)
    if abs(phi) > activity_tol:
        raise NotFeasible(f"complementarity product {phi:.3g} exceeds {activity_tol:g}")

    sets = stationarity_sets(problem, x, activity_tol)
    y_L, y_R = y[cons.left], y[cons.right]
    violated = []
    grad = problem.Q @ x + problem.g - cons.M.T @ y
    if np.abs(grad).max() > activity_tol:
        violated.append("lagrangian_gradient")
    for name, rows in (("general", cons.general), ("box", cons.box)):
        pair_min = np.minimum(slack[rows], y[rows])
        if pair_min.size and np.abs(pair_min).max() > activity_tol:
            violated.append(f"{name}_complementary_slackness")
    if any(abs(y_L[i]) > activity_tol for i in sets.right_strong):
        violated.append("left_multiplier_nonzero_on_right_active")
    if any(abs(y_R[i]) > activity_tol for i in sets.left_strong):
        violated.append("right_multiplier_nonzero_on_left_active")
    # a pair active on neither side is only feasible through the tolerance;
    # its multipliers must vanish as they would on an inactive row
    if any(abs(y_L[i]) > activity_tol for i in set(range(problem.n_C)) - sets.left) or any(
        abs(y_R[i]) > activity_tol for i in set(range(problem.n_C)) - sets.right
    ):
        violated.append("multiplier_on_inactive_row")
    if any(min(y_L[i], y_R[i]) < -activity_tol for i in sets.weak):
        violated.append("weakly_active_sign")
    return StationarityCertificate(not violated, violated, sets, y)


def _certify(problem, x, y, rho, cons) -> StationarityCertificate:
    mult = lcqp_multipliers(problem, x, y, rho, cons)
    try:
        cert = check_strong_stationarity(problem, x, mult, ACTIVITY_TOL, cons)
    except NotFeasible as exc:
        return StationarityCertificate(False, [f"not_feasible: {exc}"], None, mult)
    cert.multipliers = mult
    return cert


def solve(problem: LcqpProblem, options: SolverOptions = None, x0=None) -> SolverResult:
    """Find a stationary point of the LCQP by penalty homotopy + SCP."""
    options = options or SolverOptions()
    if x0 is None:
        x0 = problem.x0
    if x0 is not None:
        x0 = np.asarray(x0, float)
        if x0.shape != (problem.n,) or not np.all(np.isfinite(x0)):
            raise ValueError(f"x0 must be a finite vector of length {problem.n}")
    mode = options.init_mode or (InitMode.GIVEN_X0 if x0 is not None else InitMode.ZERO_PENALTY_QP)
    if mode is InitMode.GIVEN_X0 and x0 is None:
        raise ValueError("init mode GIVEN_X0 requires x0")

    ws = QpWorkspace(problem)
    cons = ws.constraints
    trace = SolveTrace(factorization_count=ws.factorization_count)
    rho = options.rho0
    ctx = PenaltyContext(problem, rho)

    def finish(status, x, y):
        trace.factorization_count = ws.factorization_count
        cert = _certify(problem, x, y, rho, cons) if status is not Status.INFEASIBLE else None
        stat = stationarity_residual(problem, ctx, x, y, cons) if status is not Status.INFEASIBLE else np.inf
        return SolverResult(
            x=x, y=y, status=status, stationarity_certificate=cert, final_rho=rho,
            objective=objective(problem, x), phi=complementarity_residual(problem, x),
            stationarity=stat, trace=trace, constraints=cons,
        )

    try:
        if mode is InitMode.ZERO_PENALTY_QP:
            if x0 is not None:
                ws.warm_start(x0)
            x, y, _ = ws.solve(problem.g)
        elif ws.warm_start(x0):
            x, y = x0.copy(), np.zeros(cons.m)
        else:
            # Q-norm projection of x0 onto the polyhedron
            x, y, _ = ws.solve(-(problem.Q @ x0))
            y = np.zeros(cons.m)
    except InfeasibleQp:
        logger.info("initial QP infeasible")
        return finish(Status.INFEASIBLE, x0 if x0 is not None else np.zeros(problem.n), np.zeros(cons.m))

    k = 0
    t_start = time.perf_counter()
    while True:
        j = 0
        stat = stationarity_residual(problem, ctx, x, y, cons)
        while stat > options.tol_stationarity:
            if j >= options.max_inner:
                logger.info("inner iteration limit at k=%d rho=%g", k, rho)
                return finish(Status.ITERATION_LIMIT, x, y)
            merit_before = merit(problem, ctx, x)
            try:
                x_star, y, _ = ws.solve(problem.g + rho * (ctx.C @ x))
            except IterationLimit:
                return finish(Status.ITERATION_LIMIT, x, y)
            x_model = x
            step = optimal_step_length(problem, ctx, x, x_star)
            step_norm = float(np.abs(x_star - x).max())
            if step.alpha == 1.0:
                x = x_star  # keeps active rows exact
            elif step.alpha > 0.0:
                x = x + step.alpha * (x_star - x)
            stat = stationarity_residual(problem, ctx, x, y, cons)
            rec = IterationRecord(
                k=k, j=j, rho=rho, alpha=step.alpha, merit_before=merit_before,
                merit=merit(problem, ctx, x), stationarity=stat,
                phi=complementarity_residual(problem, x), active_set_changes=ws.last_changes,
                wall_time=time.perf_counter() - t_start, gamma=step.gamma, delta=step.delta,
                ell=step.ell, ell_used=step.ell_used, step_norm=step_norm,
                x=x_model, x_star=x_star,
            )
            trace.iterations.append(rec)
            logger.debug("k=%d j=%d rho=%.3g alpha=%.3g merit=%.10g stat=%.3g phi=%.3g",
                         k, j, rho, step.alpha, rec.merit, stat, rec.phi)
            j += 1

        phi = complementarity_residual(problem, x)
        trace.outer.append(OuterRecord(k, rho, x.copy(), y.copy(), j, stat, phi))
        logger.info("outer k=%d rho=%.3g inner=%d phi=%.3g", k, rho, j, phi)
        if phi < options.tol_complementarity:
            return finish(Status.STATIONARY_POINT, x, y)
        if rho * options.beta > options.rho_max:
            return finish(Status.PENALTY_LIMIT, x, y)
        rho *= options.beta
        ctx = ctx.with_rho(rho)
        k += 1
