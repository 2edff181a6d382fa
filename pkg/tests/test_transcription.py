import math

import numpy as np
import pytest

from lcqp.problem import complementarity_residual, objective
from lcqp.solver import Status, solve
from lcqp.transcription import (
    IndexMapMismatch,
    IvocpConfig,
    IvocpIndexMap,
    analytic_trajectory,
    build_ivocp,
    extract_x0,
    optimal_initial_value,
    simulate,
)

X0_STAR = (9 - math.sqrt(417)) / 8


def test_dimensions():
    inst = build_ivocp(IvocpConfig(2))
    p = inst.problem
    assert (p.n, p.n_C, p.n_A) == (9, 4, 8)


def test_index_map():
    idx = IvocpIndexMap(3)
    cols = np.concatenate([idx.state, idx.switch, idx.lambda_minus, idx.slack])
    np.testing.assert_array_equal(cols, np.arange(idx.n))
    assert idx.variable_of("STATE", 0) == 0
    assert idx.variable_of("SWITCH", 1) == 4
    assert idx.variable_of("SLACK", 3) == 12
    with pytest.raises(IndexError):
        idx.variable_of("SWITCH", 0)


def test_config_validation():
    with pytest.raises(ValueError):
        IvocpConfig(1)
    with pytest.raises(ValueError):
        IvocpConfig(10, regularization_eps=0)


def test_hessian_bounded_below_by_eps():
    inst = build_ivocp(IvocpConfig(10))
    assert np.linalg.eigvalsh(inst.problem.Q).min() >= inst.config.regularization_eps * (1 - 1e-9)


@pytest.mark.parametrize("x0", [-2.0, -1.43, -0.05, 0.0, 0.7])
def test_simulation_is_feasible(x0):
    inst = build_ivocp(IvocpConfig(20))
    z = simulate(inst, x0)
    p = inst.problem
    assert (p.A @ z - p.b).min() >= -1e-12
    assert min((p.L @ z).min(), (p.R @ z).min()) >= -1e-12
    assert complementarity_residual(p, z) == pytest.approx(0, abs=1e-12)


def test_objective_matches_quadrature():
    inst = build_ivocp(IvocpConfig(8))
    z = simulate(inst, 0.25)
    x = z[inst.index.state]
    h = inst.config.h
    J = h * np.sum(x[:-1] ** 2) + (x[-1] - 5 / 3) ** 2
    eps_terms = 0.5e-6 * np.sum(z[inst.config.N + 1:] ** 2)
    assert objective(inst.problem, z) + inst.objective_offset == pytest.approx(J + eps_terms, rel=1e-12)


def test_analytic_cost_values():
    assert analytic_trajectory(0.0).objective == pytest.approx(8 / 3 + 1 / 9, rel=1e-14)
    t = analytic_trajectory(-3.0)
    assert t.switch_time == 1.0
    assert t.objective == pytest.approx(3 + 1 / 3 + 4 / 9, rel=1e-14)
    np.testing.assert_allclose(t([0.0, 1.0, 2.0]), [-3, 0, 1])


def test_optimal_initial_value():
    # a comparison-based search on a smooth minimum resolves x only to ~sqrt(eps)
    assert optimal_initial_value() == pytest.approx(X0_STAR, abs=3e-8)
    assert analytic_trajectory(X0_STAR).objective <= analytic_trajectory(X0_STAR + 1e-4).objective


def test_extract_x0_checks_length():
    with pytest.raises(IndexMapMismatch):
        extract_x0(np.zeros(5), IvocpIndexMap(3))


def test_solved_trajectory_structure():
    inst = build_ivocp(IvocpConfig(50))
    r = solve(inst.problem, x0=simulate(inst, 1.0))
    assert r.status is Status.STATIONARY_POINT
    idx, h = inst.index, inst.config.h
    x, y, lam = r.x[idx.state], r.x[idx.switch], r.x[idx.lambda_minus]
    np.testing.assert_allclose(x[1:] - x[:-1] - h * (3 - 2 * y), 0, atol=1e-9)
    np.testing.assert_allclose(lam, np.maximum(-x[1:], 0), atol=1e-6)
    pos, neg = x[1:] > 1e-6, x[1:] < -1e-6
    np.testing.assert_allclose(y[pos], 1, atol=1e-6)
    np.testing.assert_allclose(y[neg], 0, atol=1e-6)
    assert abs(extract_x0(r, idx) - X0_STAR) < 0.1


def test_discretization_converges_in_N():
    errs = []
    for N in (25, 50, 100):
        inst = build_ivocp(IvocpConfig(N))
        r = solve(inst.problem, x0=simulate(inst, -0.5))
        errs.append(abs(extract_x0(r, inst.index) - X0_STAR))
    assert all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
