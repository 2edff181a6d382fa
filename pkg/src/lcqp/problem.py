"""LCQP data model, penalty/merit evaluation and the JSON problem file format.

A problem is

    minimize    1/2 x'Qx + g'x
    subject to  Ax >= b,
                0 <= Lx  _|_  Rx >= 0,
                lb <= x <= ub            (optional)

with Q symmetric positive definite.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

SYMMETRY_RTOL = 1e-12


class ProblemError(ValueError):
    """Base class for invalid problem data; ``field`` names the culprit."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DimensionMismatch(ProblemError):
    pass


class NonSymmetricHessian(ProblemError):
    pass


class IndefiniteHessian(ProblemError):
    pass


class InvalidValue(ProblemError):
    """NaN/Inf in data, or lb > ub."""


class ParseError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True, eq=False)
class LcqpProblem:
    """Immutable LCQP instance. Arrays are copied and made read-only.

    ``A``/``b`` may be omitted (no general inequalities); ``lb``/``ub``
    default to -inf/+inf. ``x0`` is an optional stored initial guess.
    """

    Q: np.ndarray
    g: np.ndarray
    L: np.ndarray
    R: np.ndarray
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        n = Q.shape[1] if Q.ndim == 2 else 0
        A = np.zeros((0, n)) if self.A is None else np.array(self.A, dtype=float)
        b = np.zeros(0) if self.b is None else np.array(self.b, dtype=float)
        if A.ndim == 1 and A.size == 0:
            A = A.reshape(0, n)
        lb = np.full(n, -np.inf) if self.lb is None else np.array(self.lb, dtype=float)
        ub = np.full(n, np.inf) if self.ub is None else np.array(self.ub, dtype=float)
        L = np.atleast_2d(np.array(self.L, dtype=float))
        R = np.atleast_2d(np.array(self.R, dtype=float))
        set_ = functools.partial(object.__setattr__, self)
        set_("Q", _frozen(Q))
        set_("g", _frozen(np.ravel(self.g)))
        set_("L", _frozen(L))
        set_("R", _frozen(R))
        set_("A", _frozen(A))
        set_("b", _frozen(np.ravel(b)))
        set_("lb", _frozen(np.ravel(lb)))
        set_("ub", _frozen(np.ravel(ub)))
        if self.x0 is not None:
            set_("x0", _frozen(np.ravel(self.x0)))
        validate(self)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def n_A(self) -> int:
        return self.A.shape[0]

    @property
    def n_C(self) -> int:
        return self.L.shape[0]

    @property
    def has_bounds(self) -> bool:
        return bool(np.isfinite(self.lb).any() or np.isfinite(self.ub).any())

    @functools.cached_property
    def hessian_factor(self) -> np.ndarray:
        """Lower Cholesky factor of Q, computed once during validation."""
        try:
            return scipy.linalg.cholesky(self.Q, lower=True)
        except np.linalg.LinAlgError:
            raise IndefiniteHessian("Q is not positive definite", "Q") from None

    @functools.cached_property
    def C(self) -> np.ndarray:
        """Symmetrized complementarity matrix L'R + R'L."""
        LtR = self.L.T @ self.R
        return _frozen(LtR + LtR.T)

    def with_x0(self, x0) -> "LcqpProblem":
        return dataclasses.replace(self, x0=x0)

    def equals(self, other: "LcqpProblem") -> bool:
        """Field-wise bit-exact comparison (NaN-free data)."""
        for f in ("Q", "g", "L", "R", "A", "b", "lb", "ub"):
            a, b = getattr(self, f), getattr(other, f)
            if a.shape != b.shape or not np.array_equal(a, b):
                return False
        if (self.x0 is None) != (other.x0 is None):
            return False
        return self.x0 is None or np.array_equal(self.x0, other.x0)


def validate(problem: LcqpProblem) -> LcqpProblem:
    """Check shapes, finiteness, symmetry and definiteness of ``problem``."""
    Q, g, A, b, L, R = problem.Q, problem.g, problem.A, problem.b, problem.L, problem.R
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
        raise DimensionMismatch(f"Q must be square and non-empty, got {Q.shape}", "Q")
    n = Q.shape[0]
    if g.shape != (n,):
        raise DimensionMismatch(f"g has length {g.size}, expected {n}", "g")
    if A.ndim != 2 or A.shape[1] != n:
        raise DimensionMismatch(f"A has shape {A.shape}, expected (n_A, {n})", "A")
    if b.shape != (A.shape[0],):
        raise DimensionMismatch(f"b has length {b.size}, expected {A.shape[0]}", "b")
    if L.ndim != 2 or L.shape[1] != n or L.shape[0] == 0:
        raise DimensionMismatch(f"L has shape {L.shape}, expected (n_C >= 1, {n})", "L")
    if R.shape != L.shape:
        raise DimensionMismatch(f"R has shape {R.shape}, expected {L.shape}", "R")
    for name in ("lb", "ub"):
        if getattr(problem, name).shape != (n,):
            raise DimensionMismatch(f"{name} must have length {n}", name)
    if problem.x0 is not None and problem.x0.shape != (n,):
        raise DimensionMismatch(f"x0 must have length {n}", "x0")

    for name in ("Q", "g", "A", "b", "L", "R"):
        if not np.all(np.isfinite(getattr(problem, name))):
            raise InvalidValue(f"{name} contains NaN or Inf", name)
    if np.isnan(problem.lb).any() or np.isnan(problem.ub).any():
        raise InvalidValue("bounds contain NaN", "lb")
    if np.any(problem.lb == np.inf) or np.any(problem.ub == -np.inf):
        raise InvalidValue("bounds must not exclude every value", "lb")
    if np.any(problem.lb > problem.ub):
        raise InvalidValue("lb > ub", "lb")

    scale = max(np.abs(Q).max(), np.finfo(float).tiny)
    if np.abs(Q - Q.T).max() > SYMMETRY_RTOL * scale:
        raise NonSymmetricHessian("Q is not symmetric", "Q")
    problem.hessian_factor  # raises IndefiniteHessian
    return problem


class PenaltyContext:
    """The symmetrized complementarity matrix together with a penalty value."""

    def __init__(self, problem: LcqpProblem, rho: float):
        if not rho >= 0:
            raise ValueError(f"rho must be non-negative, got {rho}")
        self.C = problem.C
        self.rho = float(rho)

    def with_rho(self, rho: float) -> "PenaltyContext":
        ctx = object.__new__(PenaltyContext)
        ctx.C, ctx.rho = self.C, float(rho)
        return ctx


def _check_x(problem: LcqpProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({problem.n},)", "x")
    return x


def complementarity_residual(problem: LcqpProblem, x) -> float:
    """phi(x) = (Lx)'(Rx). Negative values are possible off the feasible set."""
    x = _check_x(problem, x)
    return float((problem.L @ x) @ (problem.R @ x))


def objective(problem: LcqpProblem, x) -> float:
    x = _check_x(problem, x)
    return float(0.5 * x @ (problem.Q @ x) + problem.g @ x)


def merit(problem: LcqpProblem, ctx: PenaltyContext, x) -> float:
    """psi(x, rho) = 1/2 x'Qx + g'x + rho * 1/2 x'Cx."""
    x = _check_x(problem, x)
    return float(0.5 * x @ (problem.Q @ x) + problem.g @ x + ctx.rho * (0.5 * x @ (ctx.C @ x)))


def merit_gradient(problem: LcqpProblem, ctx: PenaltyContext, x) -> np.ndarray:
    x = _check_x(problem, x)
    return problem.Q @ x + ctx.rho * (ctx.C @ x) + problem.g


# -- file format -------------------------------------------------------------

_REQUIRED = ("n", "n_A", "n_C", "Q", "g", "A", "b", "L", "R")


def _encode_matrix(M: np.ndarray, encoding: str) -> dict:
    if encoding == "dense":
        return {"dense": M.tolist()}
    rows, cols = np.nonzero(M)
    return {
        "coo": {
            "rows": rows.tolist(),
            "cols": cols.tolist(),
            "vals": M[rows, cols].tolist(),
            "shape": list(M.shape),
        }
    }


def _encode_bounds(v: np.ndarray) -> list:
    return [None if math.isinf(t) else float(t) for t in v]


def _decode_matrix(obj, field: str, shape: tuple[int, int]) -> np.ndarray:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ParseError("matrix must be an object with a single 'dense' or 'coo' key", field)
    if "dense" in obj:
        data = obj["dense"]
        if shape[0] == 0:
            if data not in ([], [[]]):
                raise ParseError("expected an empty matrix", field)
            return np.zeros(shape)
        try:
            M = np.array(data, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad dense data: {exc}", field) from None
        if M.shape != shape:
            raise ParseError(f"dense shape {M.shape} does not match {shape}", field)
        return M
    if "coo" in obj:
        coo = obj["coo"]
        try:
            r = np.asarray(coo["rows"], dtype=int)
            c = np.asarray(coo["cols"], dtype=int)
            v = np.asarray(coo["vals"], dtype=float)
            declared = tuple(int(s) for s in coo["shape"])
        except KeyError as exc:
            raise ParseError(f"coo entry lacks {exc.args[0]!r}", field) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad coo data: {exc}", field) from None
        if declared != shape:
            raise ParseError(f"coo shape {declared} does not match {shape}", field)
        if not (r.shape == c.shape == v.shape):
            raise ParseError("coo rows/cols/vals lengths differ", field)
        if r.size and (r.min() < 0 or r.max() >= shape[0] or c.min() < 0 or c.max() >= shape[1]):
            raise ParseError("coo index out of range", field)
        M = np.zeros(shape)
        np.add.at(M, (r, c), v)
        return M
    raise ParseError("matrix must use 'dense' or 'coo'", field)


def _decode_vector(obj, field: str, size: int, nullable: float | None = None) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != size:
        raise ParseError(f"expected a list of length {size}", field)
    out = np.empty(size)
    for i, t in enumerate(obj):
        if t is None and nullable is not None:
            out[i] = nullable
        elif isinstance(t, (int, float)) and not isinstance(t, bool):
            out[i] = t
        else:
            raise ParseError(f"entry {i} is not a number", field)
    return out


def problem_to_dict(problem: LcqpProblem, encoding: str = "dense") -> dict:
    if encoding not in ("dense", "coo"):
        raise ValueError(f"unknown encoding {encoding!r}")
    d = {
        "n": problem.n,
        "n_A": problem.n_A,
        "n_C": problem.n_C,
        "Q": _encode_matrix(problem.Q, encoding),
        "g": problem.g.tolist(),
        "A": _encode_matrix(problem.A, encoding),
        "b": problem.b.tolist(),
        "L": _encode_matrix(problem.L, encoding),
        "R": _encode_matrix(problem.R, encoding),
    }
    if np.isfinite(problem.lb).any():
        d["lb"] = _encode_bounds(problem.lb)
    if np.isfinite(problem.ub).any():
        d["ub"] = _encode_bounds(problem.ub)
    if problem.x0 is not None:
        d["x0"] = problem.x0.tolist()
    return d


def problem_from_dict(d: dict) -> LcqpProblem:
    if not isinstance(d, dict):
        raise ParseError("top level must be a JSON object")
    for key in _REQUIRED:
        if key not in d:
            raise ParseError("missing required field", key)
    dims = {}
    for key in ("n", "n_A", "n_C"):
        v = d[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise ParseError("must be a non-negative integer", key)
        dims[key] = v
    n, n_A, n_C = dims["n"], dims["n_A"], dims["n_C"]
    kwargs = dict(
        Q=_decode_matrix(d["Q"], "Q", (n, n)),
        g=_decode_vector(d["g"], "g", n),
        A=_decode_matrix(d["A"], "A", (n_A, n)),
        b=_decode_vector(d["b"], "b", n_A),
        L=_decode_matrix(d["L"], "L", (n_C, n)),
        R=_decode_matrix(d["R"], "R", (n_C, n)),
    )
    if "lb" in d:
        kwargs["lb"] = _decode_vector(d["lb"], "lb", n, nullable=-np.inf)
    if "ub" in d:
        kwargs["ub"] = _decode_vector(d["ub"], "ub", n, nullable=np.inf)
    if d.get("x0") is not None:
        kwargs["x0"] = _decode_vector(d["x0"], "x0", n)
    return LcqpProblem(**kwargs)


def save_problem(problem: LcqpProblem, path, encoding: str = "dense") -> None:
    text = json.dumps(problem_to_dict(problem, encoding), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_problem(path) -> LcqpProblem:
    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return problem_from_dict(d)
