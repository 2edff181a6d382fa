"""Initial-value optimal control problem with a switching ODE, as an LCQP.

The continuous problem is

    minimize over x0:  int_0^2 x(t)^2 dt + (x(2) - 5/3)^2
    with               x(0) = x0,  x'(t) in 2 - sgn(x(t)).

Its unique Filippov solution has slope 3 while x < 0 and slope 1 while
x > 0. The switch is written with an algebraic variable y (slope
3 - 2y) and the negative part lambda of x, both tied to x through two
complementarity pairs, then discretized with implicit Euler on N steps.

Variable layout of the emitted LCQP (k = 1..N for algebraic variables)::

    [x_0 .. x_N | y_1 .. y_N | lambda_1 .. lambda_N | s_1 .. s_N]

``s_k = 1 - y_k`` is a slack that keeps the affine complementarity
``x_k + lambda_k _|_ 1 - y_k`` homogeneous.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.optimize

from .problem import LcqpProblem

HORIZON = 2.0
TERMINAL_TARGET = 5.0 / 3.0


class IndexMapMismatch(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class IvocpConfig:
    N: int
    regularization_eps: float = 1e-6

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 2):
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")
        if not self.regularization_eps > 0:
            raise ValueError("regularization_eps must be positive")

    @property
    def h(self) -> float:
        return HORIZON / self.N


@dataclasses.dataclass(frozen=True)
class IvocpIndexMap:
    N: int

    @property
    def n(self) -> int:
        return 4 * self.N + 1

    @property
    def state(self) -> np.ndarray:
        return np.arange(0, self.N + 1)

    @property
    def switch(self) -> np.ndarray:
        return np.arange(self.N + 1, 2 * self.N + 1)

    @property
    def lambda_minus(self) -> np.ndarray:
        return np.arange(2 * self.N + 1, 3 * self.N + 1)

    @property
    def slack(self) -> np.ndarray:
        return np.arange(3 * self.N + 1, 4 * self.N + 1)

    def variable_of(self, kind: str, k: int) -> int:
        """Column of STATE(k) (k=0..N) or SWITCH/LAMBDA_MINUS/SLACK(k) (k=1..N)."""
        if kind == "STATE":
            if not 0 <= k <= self.N:
                raise IndexError(k)
            return k
        offsets = {"SWITCH": self.N, "LAMBDA_MINUS": 2 * self.N, "SLACK": 3 * self.N}
        if kind not in offsets or not 1 <= k <= self.N:
            raise IndexError((kind, k))
        return offsets[kind] + k


@dataclasses.dataclass(frozen=True)
class IvocpLcqp:
    problem: LcqpProblem
    index: IvocpIndexMap
    config: IvocpConfig

    @property
    def objective_offset(self) -> float:
        """Constant dropped from the terminal cost, (5/3)^2."""
        return TERMINAL_TARGET**2


def build_ivocp(config: IvocpConfig) -> IvocpLcqp:
    N, h, eps = config.N, config.h, config.regularization_eps
    idx = IvocpIndexMap(N)
    n = idx.n
    X, Y, LAM, S = idx.state, idx.switch, idx.lambda_minus, idx.slack

    # objective: sum_{k<N} h x_k^2 + (x_N - 5/3)^2, eps on algebraic variables
    Q = np.zeros((n, n))
    Q[X[:-1], X[:-1]] = 2 * h
    Q[X[-1], X[-1]] = 2.0
    for block in (Y, LAM, S):
        Q[block, block] = eps
    g = np.zeros(n)
    g[X[-1]] = -2 * TERMINAL_TARGET

    # equalities, each as a pair of opposite inequalities:
    #   x_k - x_{k-1} + 2h y_k = 3h      (implicit Euler)
    #   y_k + s_k = 1                    (slack)
    E = np.zeros((2 * N, n))
    e = np.zeros(2 * N)
    for k in range(1, N + 1):
        r = k - 1
        E[r, X[k]], E[r, X[k - 1]], E[r, Y[k - 1]] = 1.0, -1.0, 2 * h
        e[r] = 3 * h
        E[N + r, Y[k - 1]] = E[N + r, S[k - 1]] = 1.0
        e[N + r] = 1.0
    A = np.vstack([E, -E])
    b = np.concatenate([e, -e])

    # pairs: (x_k + lambda_k) _|_ s_k   and   lambda_k _|_ y_k
    L = np.zeros((2 * N, n))
    R = np.zeros((2 * N, n))
    for k in range(1, N + 1):
        i = 2 * (k - 1)
        L[i, X[k]] = L[i, LAM[k - 1]] = 1.0
        R[i, S[k - 1]] = 1.0
        L[i + 1, LAM[k - 1]] = 1.0
        R[i + 1, Y[k - 1]] = 1.0

    problem = LcqpProblem(Q=Q, g=g, L=L, R=R, A=A, b=b)
    return IvocpLcqp(problem, idx, config)


def simulate(instance: IvocpLcqp, x0: float) -> np.ndarray:
    """Implicit-Euler forward simulation from ``x0``: a feasible LCQP point."""
    N, h = instance.config.N, instance.config.h
    idx = instance.index
    z = np.zeros(idx.n)
    x = float(x0)
    z[idx.state[0]] = x
    for k in range(1, N + 1):
        if x >= -h:
            y, x_next = 1.0, x + h
        elif x <= -3 * h:
            y, x_next = 0.0, x + 3 * h
        else:  # lands exactly on the switching surface
            y, x_next = (3 * h + x) / (2 * h), 0.0
        x = x_next
        z[idx.state[k]] = x
        z[idx.switch[k - 1]] = y
        z[idx.lambda_minus[k - 1]] = max(-x, 0.0)
        z[idx.slack[k - 1]] = 1.0 - y
    return z


def extract_x0(x, index: IvocpIndexMap) -> float:
    x = np.asarray(getattr(x, "x", x), dtype=float)
    if x.shape != (index.n,):
        raise IndexMapMismatch(f"solution has length {x.shape}, index map expects {index.n}")
    return float(x[index.state[0]])


@dataclasses.dataclass(frozen=True)
class AnalyticTrajectory:
    """Filippov solution from ``x0`` and its exact cost."""

    x0: float
    switch_time: float  # 0 when x0 >= 0, time at which x reaches 0 otherwise
    objective: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.x0 >= 0:
            return self.x0 + t
        return np.where(t < self.switch_time, self.x0 + 3 * t, t - self.switch_time)


def analytic_trajectory(x0: float) -> AnalyticTrajectory:
    x0 = float(x0)
    if not math.isfinite(x0):
        raise ValueError("x0 must be finite")
    T = HORIZON
    if x0 >= 0:
        integral = ((x0 + T) ** 3 - x0**3) / 3
        xT = x0 + T
        ts = 0.0
    else:
        ts = -x0 / 3
        if ts >= T:
            integral = ((x0 + 3 * T) ** 3 - x0**3) / 9
            xT = x0 + 3 * T
        else:
            integral = -(x0**3) / 9 + (T - ts) ** 3 / 3
            xT = T - ts
    J = integral + (xT - TERMINAL_TARGET) ** 2
    return AnalyticTrajectory(x0, ts, float(J))


def optimal_initial_value(tol: float = 1e-10) -> float:
    """Minimizer of the exact cost over x0 in [-3, 1] by golden-section search."""
    return float(
        scipy.optimize.golden(lambda v: analytic_trajectory(v).objective, brack=(-3.0, -1.0, 1.0), tol=tol)
    )


def trajectory_rms(x, instance: IvocpLcqp, x0_star: float) -> float:
    """RMS distance of the discrete states to the optimal Filippov solution."""
    x = np.asarray(getattr(x, "x", x), dtype=float)
    t = np.linspace(0.0, HORIZON, instance.config.N + 1)
    ref = analytic_trajectory(x0_star)(t)
    return float(np.sqrt(np.mean((x[instance.index.state] - ref) ** 2)))
