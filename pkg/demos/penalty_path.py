"""Follow the penalty homotopy on a random instance.

Prints, per penalty value, the number of inner QP solves, the
complementarity product and the objective, then checks the final point
against exhaustive branch enumeration.
"""

import numpy as np

from lcqp import solve
from lcqp.oracle import branch_stationarity_gap, global_solve_by_enumeration, random_lcqp

problem = random_lcqp(np.random.default_rng(12), n=5, n_C=3, n_A=2)
r = solve(problem)

print(f"{'k':>3} {'rho':>10} {'inner':>6} {'phi':>11} {'objective':>12}")
for o in r.trace.outer:
    f = 0.5 * o.x @ problem.Q @ o.x + problem.g @ o.x
    print(f"{o.k:>3} {o.rho:>10.4g} {o.inner_iterations:>6} {o.phi:>11.3e} {f:>12.6f}")

steps = r.trace.iterations
full = sum(it.alpha == 1.0 for it in steps)
print(f"\n{len(steps)} inner steps, {full} full steps, one Hessian factorization: {r.factorization_count == 1}")

best = global_solve_by_enumeration(problem)
print(f"solver objective {r.objective:.8f}, global optimum {best.objective:.8f}")
print(f"distance to the minimizer of its branch {branch_stationarity_gap(problem, r.x):.1e}")
print(f"strongly stationary: {r.stationarity_certificate.holds}")
