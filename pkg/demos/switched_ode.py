"""Optimal initial value for a switched ODE, solved as one LCQP.

    minimize over x0   int_0^2 x(t)^2 dt + (x(2) - 5/3)^2
    x(0) = x0,         x' = 3 while x < 0,  x' = 1 while x > 0

The switch is written with complementarity constraints and implicit
Euler, so the whole optimal control problem becomes a single LCQP. The
script solves it for a few step counts and compares the optimal initial
value with the exact one, (9 - sqrt(417)) / 8.
"""

import math
import time

import numpy as np

from lcqp import solve
from lcqp.transcription import IvocpConfig, build_ivocp, extract_x0, simulate, trajectory_rms

X0_STAR = (9 - math.sqrt(417)) / 8
print(f"exact optimum x0* = {X0_STAR:.10f}\n")
print(f"{'N':>5} {'vars':>5} {'x0':>12} {'|x0-x0*|':>10} {'rms':>9} {'phi':>10} {'QPs':>5} {'ms':>8}")

for N in (25, 50, 100):
    inst = build_ivocp(IvocpConfig(N))
    start = simulate(inst, 0.5)  # a feasible trajectory from a poor guess
    t0 = time.perf_counter()
    r = solve(inst.problem, x0=start)
    ms = 1e3 * (time.perf_counter() - t0)
    x0 = extract_x0(r, inst.index)
    print(f"{N:>5} {inst.problem.n:>5} {x0:>12.6f} {abs(x0 - X0_STAR):>10.5f} "
          f"{trajectory_rms(r, inst, X0_STAR):>9.5f} {r.phi:>10.1e} {r.trace.inner_iterations:>5} {ms:>8.1f}")

# the discrete switch: y_k = 1 in the slow region (x > 0), 0 in the fast one
inst = build_ivocp(IvocpConfig(20))
r = solve(inst.problem, x0=simulate(inst, 0.5))
x = r.x[inst.index.state]
y = r.x[inst.index.switch]
print("\nN = 20 trajectory (k, x_k, y_k):")
for k in range(1, 21, 3):
    print(f"  {k:>2} {x[k]:+.4f} {y[k - 1]:.3f}")
