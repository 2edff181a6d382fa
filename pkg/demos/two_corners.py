"""The smallest interesting LCQP: two strongly stationary corners.

    minimize   x1^2 + x2^2 - 2 x1 - 2 x2
    subject to 0 <= x1 _|_ x2 >= 0

The unconstrained minimizer (1, 1) violates complementarity. The two
corners (1, 0) and (0, 1) are strongly stationary with objective -1; the
origin is only C-stationary. Run from a few starting points and print
where each solve ends, how it got there and whether the strong
stationarity certificate holds.
"""

import numpy as np

from lcqp import LcqpProblem, solve
from lcqp.oracle import global_solve_by_enumeration

problem = LcqpProblem(
    Q=2 * np.eye(2),
    g=np.array([-2.0, -2.0]),
    L=np.array([[1.0, 0.0]]),
    R=np.array([[0.0, 1.0]]),
)

best = global_solve_by_enumeration(problem)
print(f"branch enumeration: global objective {best.objective:+.6f}")
for b in best.branches:
    print(f"  branch {b.assignment}: x = {np.round(b.x, 6)}, objective {b.objective:+.6f}")
print()

for x0 in ([2.0, 0.5], [0.3, 1.7], [1.5, -0.5], [-1.0, -1.0]):
    r = solve(problem, x0=x0)
    print(f"x0 = {x0}")
    print(f"  status {r.status.value}, x = {np.round(r.x, 8)}, objective {r.objective:+.8f}")
    print(f"  {r.trace.outer_iterations} penalty updates, {r.trace.inner_iterations} QP solves, "
          f"final rho {r.final_rho:g}")
    cert = r.stationarity_certificate
    print(f"  strongly stationary: {cert.holds} {cert.violated_conditions or ''}")
