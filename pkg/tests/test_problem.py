import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcqp.problem import (
    DimensionMismatch,
    IndefiniteHessian,
    InvalidValue,
    LcqpProblem,
    NonSymmetricHessian,
    ParseError,
    PenaltyContext,
    complementarity_residual,
    load_problem,
    merit,
    merit_gradient,
    objective,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)

from conftest import make_corners


def test_corners_is_valid(corners):
    assert (corners.n, corners.n_A, corners.n_C) == (2, 0, 1)
    assert not corners.has_bounds
    np.testing.assert_array_equal(corners.C, [[0, 1], [1, 0]])


def test_zero_hessian_is_indefinite():
    with pytest.raises(IndefiniteHessian) as exc:
        LcqpProblem(Q=np.zeros((2, 2)), g=np.zeros(2), L=[[1, 0]], R=[[0, 1]])
    assert exc.value.field == "Q"


def test_nonsymmetric_hessian():
    with pytest.raises(NonSymmetricHessian):
        LcqpProblem(Q=[[2, 1], [0, 2]], g=np.zeros(2), L=[[1, 0]], R=[[0, 1]])


def test_shape_mismatch_names_field():
    with pytest.raises(DimensionMismatch) as exc:
        LcqpProblem(Q=np.eye(3), g=np.zeros(3), L=[[1, 0, 0]], R=[[0, 1]])
    assert exc.value.field == "R"
    with pytest.raises(DimensionMismatch) as exc:
        LcqpProblem(Q=np.eye(2), g=np.zeros(3), L=[[1, 0]], R=[[0, 1]])
    assert exc.value.field == "g"


def test_invalid_values():
    with pytest.raises(InvalidValue):
        LcqpProblem(Q=np.eye(2), g=[np.nan, 0], L=[[1, 0]], R=[[0, 1]])
    with pytest.raises(InvalidValue):
        LcqpProblem(Q=np.eye(2), g=np.zeros(2), L=[[1, 0]], R=[[0, 1]], lb=[1, 0], ub=[0, 1])


def test_arrays_are_read_only_copies(corners):
    Q = 2 * np.eye(2)
    p = LcqpProblem(Q=Q, g=np.zeros(2), L=[[1, 0]], R=[[0, 1]])
    Q[0, 0] = 99
    assert p.Q[0, 0] == 2
    with pytest.raises(ValueError):
        p.Q[0, 0] = 5


def test_complementarity_residual(corners):
    assert complementarity_residual(corners, [1, 0]) == 0
    assert complementarity_residual(corners, [0, 0]) == 0
    assert complementarity_residual(corners, [1, 1]) == 1


def test_objective_and_merit(corners):
    assert objective(corners, [1, 0]) == -1
    assert objective(corners, [0, 1]) == -1
    assert objective(corners, [0, 0]) == 0
    assert merit(corners, PenaltyContext(corners, 1.0), [1, 1]) == -1
    assert merit(corners, PenaltyContext(corners, 10.0), [1, 0]) == -1
    assert merit(corners, PenaltyContext(corners, 3.0), [0, 0]) == 0


def test_penalty_rejects_negative_rho(corners):
    with pytest.raises(ValueError):
        PenaltyContext(corners, -1.0)


def test_merit_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    D = rng.standard_normal((4, 4))
    p = LcqpProblem(Q=D.T @ D + np.eye(4), g=rng.standard_normal(4),
                    L=rng.standard_normal((2, 4)), R=rng.standard_normal((2, 4)))
    ctx = PenaltyContext(p, 3.0)
    x = rng.standard_normal(4)
    h = 1e-6
    fd = [(merit(p, ctx, x + h * e) - merit(p, ctx, x - h * e)) / (2 * h) for e in np.eye(4)]
    np.testing.assert_allclose(merit_gradient(p, ctx, x), fd, atol=1e-6)


def test_penalty_term_is_rho_phi():
    rng = np.random.default_rng(1)
    p = LcqpProblem(Q=np.eye(3), g=np.zeros(3), L=rng.standard_normal((2, 3)), R=rng.standard_normal((2, 3)))
    x = rng.standard_normal(3)
    diff = merit(p, PenaltyContext(p, 5.0), x) - objective(p, x)
    assert diff == pytest.approx(5.0 * complementarity_residual(p, x), rel=1e-12)


@pytest.mark.parametrize("encoding", ["dense", "coo"])
def test_round_trip(tmp_path, encoding):
    p = make_corners(A=[[1.0, 1.0]], b=[-3.0], lb=[-np.inf, 0.0], ub=[5.0, np.inf], x0=[0.25, 1 / 3])
    save_problem(p, tmp_path / "p.json", encoding)
    assert load_problem(tmp_path / "p.json").equals(p)


def test_dense_and_coo_decode_identically():
    p = make_corners(A=[[1.0, 0.0], [0.5, -2.0]], b=[0.0, -1.0])
    a = problem_from_dict(problem_to_dict(p, "dense"))
    b = problem_from_dict(problem_to_dict(p, "coo"))
    assert a.equals(b) and a.equals(p)


def test_missing_field_names_it(tmp_path, corners):
    d = problem_to_dict(corners)
    del d["R"]
    (tmp_path / "p.json").write_text(json.dumps(d))
    with pytest.raises(ParseError) as exc:
        load_problem(tmp_path / "p.json")
    assert exc.value.field == "R"


def test_bad_json_reports_line(tmp_path):
    (tmp_path / "p.json").write_text('{\n "n": 2,\n "Q": [oops]\n}')
    with pytest.raises(ParseError) as exc:
        load_problem(tmp_path / "p.json")
    assert exc.value.line == 3


def test_wrong_shape_in_file(corners):
    d = problem_to_dict(corners)
    d["g"] = [1.0]
    with pytest.raises(ParseError) as exc:
        problem_from_dict(d)
    assert exc.value.field == "g"


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 3), st.data())
def test_round_trip_is_bit_exact(n, n_C, n_A, data):
    vec = lambda k: np.array(data.draw(st.lists(finite, min_size=k, max_size=k)), dtype=float)
    D = vec(n * n).reshape(n, n) * 1e-3
    p = LcqpProblem(Q=D.T @ D + np.eye(n), g=vec(n), L=vec(n_C * n).reshape(n_C, n),
                    R=vec(n_C * n).reshape(n_C, n), A=vec(n_A * n).reshape(n_A, n), b=vec(n_A))
    for enc in ("dense", "coo"):
        assert problem_from_dict(json.loads(json.dumps(problem_to_dict(p, enc)))).equals(p)
