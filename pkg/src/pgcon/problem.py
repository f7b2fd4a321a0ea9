"""Problem model: smooth objective/constraints, weighted-l1 regularizer, box set.

A problem is

    min f(x) + r(x)   s.t.  c(x) = 0,  lower <= x <= upper,

with f, c smooth (gradient/Jacobian supplied by the caller), r a weighted
l1 term and the box allowing infinite bounds.  Inequality constraints are
brought into this form with slack variables (see :func:`add_slacks`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BoxSet",
    "L1Regularizer",
    "ProblemInstance",
    "ScaleInfo",
    "DerivativeReport",
    "EvaluationError",
    "check_derivatives",
    "apply_scaling",
    "add_slacks",
    "load_problem",
    "problem_to_dict",
]


class EvaluationError(RuntimeError):
    """A problem evaluator produced a NaN or Inf."""


def _as_float_array(v, n=None):
    a = np.asarray(v, dtype=float)
    if n is not None and a.shape != (n,):
        raise ValueError(f"expected shape ({n},), got {a.shape}")
    return a


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box {x : lower <= x <= upper}; +-inf bounds allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_float_array(self.lower)
        hi = _as_float_array(self.upper, lo.shape[0])
        if np.any(lo > hi):
            raise ValueError("box has lower_i > upper_i")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def is_orthant(self) -> bool:
        """True when the box is exactly the nonnegative orthant."""
        return bool(np.all(self.lower == 0.0) and np.all(np.isinf(self.upper)))

    @staticmethod
    def free(n: int) -> "BoxSet":
        return BoxSet(np.full(n, -np.inf), np.full(n, np.inf))

    @staticmethod
    def nonnegative(n: int) -> "BoxSet":
        return BoxSet(np.zeros(n), np.full(n, np.inf))


@dataclass(frozen=True)
class L1Regularizer:
    """Weighted l1 term r(x) = sum_i weights_i * |x_i|, weights_i >= 0."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_float_array(self.weights)
        if np.any(w < 0):
            raise ValueError("l1 weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def value(self, x) -> float:
        return float(np.dot(self.weights, np.abs(x)))

    def subgradient_margin(self, x, g_r) -> float:
        """Max violation of g_r being a subgradient of r at x.

        Componentwise, g_r is valid when |g_r_i| <= w_i and, at nonzero
        x_i, g_r_i = w_i * sign(x_i).  Returns 0 for exact membership.
        """
        x = np.asarray(x, dtype=float)
        g_r = np.asarray(g_r, dtype=float)
        w = self.weights
        viol = np.maximum(np.abs(g_r) - w, 0.0)
        at_nonzero = np.abs(g_r - w * np.sign(x))
        return float(np.max(np.where(x != 0.0, np.maximum(viol, at_nonzero), viol), initial=0.0))

    def is_subgradient(self, x, g_r, tol: float) -> bool:
        """Tolerance version: nonzero classification also uses tol on |x_i|."""
        x = np.asarray(x, dtype=float)
        g_r = np.asarray(g_r, dtype=float)
        w = self.weights
        if np.any(np.abs(g_r) > w + tol):
            return False
        nz = np.abs(x) > tol
        return bool(np.all(np.abs(g_r[nz] - w[nz] * np.sign(x[nz])) <= tol))


def reg_value(reg: L1Regularizer, x) -> float:
    return reg.value(x)


def reg_subgradient_check(reg: L1Regularizer, x, g_r, tol: float) -> bool:
    return reg.is_subgradient(x, g_r, tol)


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable bundle of evaluators defining one problem.

    Evaluators must be pure functions of x; the solver caches their values
    per iterate and relies on repeat calls returning identical results.
    """

    name: str
    n: int
    m: int
    f_eval: Callable[[np.ndarray], float]
    g_eval: Callable[[np.ndarray], np.ndarray]
    c_eval: Callable[[np.ndarray], np.ndarray]
    J_eval: Callable[[np.ndarray], np.ndarray]
    reg: L1Regularizer
    box: BoxSet
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.m > self.n:
            raise ValueError("require m <= n")
        if self.reg.dim != self.n or self.box.dim != self.n:
            raise ValueError("regularizer/box dimension mismatch")
        if self.x0 is not None:
            object.__setattr__(self, "x0", _as_float_array(self.x0, self.n))

    def f(self, x) -> float:
        v = float(self.f_eval(np.asarray(x, dtype=float)))
        if not np.isfinite(v):
            raise EvaluationError(f"{self.name}: f(x) is not finite")
        return v

    def g(self, x) -> np.ndarray:
        v = _as_float_array(self.g_eval(np.asarray(x, dtype=float)), self.n)
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise EvaluationError(f"{self.name}: gradient component {bad} is not finite")
        return v

    def c(self, x) -> np.ndarray:
        v = np.asarray(self.c_eval(np.asarray(x, dtype=float)), dtype=float).reshape(self.m)
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise EvaluationError(f"{self.name}: constraint component {bad} is not finite")
        return v

    def J(self, x) -> np.ndarray:
        v = np.asarray(self.J_eval(np.asarray(x, dtype=float)), dtype=float).reshape(self.m, self.n)
        if not np.all(np.isfinite(v)):
            i, j = np.argwhere(~np.isfinite(v))[0]
            raise EvaluationError(f"{self.name}: Jacobian entry ({i},{j}) is not finite")
        return v

    def objective(self, x) -> float:
        """f(x) + r(x)."""
        return self.f(x) + self.reg.value(x)


@dataclass(frozen=True)
class ScaleInfo:
    """Multiplicative factors applied to f and each c_i; all in (0, 1]."""

    objective_factor: float
    constraint_factors: np.ndarray

    def unscale_objective(self, value: float) -> float:
        return value / self.objective_factor

    def unscale_constraints(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c, dtype=float) / self.constraint_factors


@dataclass(frozen=True)
class DerivativeReport:
    g_err: float
    J_err: float

    @property
    def max_err(self) -> float:
        return max(self.g_err, self.J_err)


def check_derivatives(p: ProblemInstance, x, h: Optional[float] = None) -> DerivativeReport:
    """Central-difference check of g against f and J against c.

    Returns the max over components of |fd - analytic| / (1 + |analytic|).
    """
    x = _as_float_array(x, p.n)
    if h is None:
        h = 1e-6 * (1.0 + float(np.max(np.abs(x), initial=0.0)))
    if h <= 0:
        raise ValueError("step size must be positive")

    g = p.g(x)
    g_fd = np.empty(p.n)
    c_fd = np.empty((p.m, p.n))
    for i in range(p.n):
        e = np.zeros(p.n)
        e[i] = h
        fp, fm = p.f(x + e), p.f(x - e)
        g_fd[i] = (fp - fm) / (2 * h)
        if p.m:
            c_fd[:, i] = (p.c(x + e) - p.c(x - e)) / (2 * h)
    g_err = float(np.max(np.abs(g_fd - g) / (1.0 + np.abs(g)), initial=0.0))
    if p.m:
        Jm = p.J(x)
        J_err = float(np.max(np.abs(c_fd - Jm) / (1.0 + np.abs(Jm))))
    else:
        J_err = 0.0
    return DerivativeReport(g_err=g_err, J_err=J_err)


def apply_scaling(p: ProblemInstance, x0) -> tuple[ProblemInstance, ScaleInfo]:
    """Scale f and each c_i so their gradient inf-norms at x0 are <= 100.

    The l1 weights are scaled by the objective factor so the scaled
    problem has the same minimizers as the original.
    """
    x0 = _as_float_array(x0, p.n)
    gn = float(np.max(np.abs(p.g(x0)), initial=0.0))
    f_fac = min(1.0, 100.0 / gn) if gn > 100.0 else 1.0
    if p.m:
        Jn = np.max(np.abs(p.J(x0)), axis=1)
        c_fac = np.where(Jn > 100.0, 100.0 / Jn, 1.0)
    else:
        c_fac = np.zeros(0)

    info = ScaleInfo(objective_factor=f_fac, constraint_factors=c_fac)
    f0, g0, c0, J0 = p.f_eval, p.g_eval, p.c_eval, p.J_eval
    scaled = ProblemInstance(
        name=p.name + ":scaled",
        n=p.n,
        m=p.m,
        f_eval=lambda x: f_fac * f0(x),
        g_eval=lambda x: f_fac * np.asarray(g0(x), dtype=float),
        c_eval=lambda x: c_fac * np.asarray(c0(x), dtype=float),
        J_eval=lambda x: c_fac[:, None] * np.asarray(J0(x), dtype=float),
        reg=L1Regularizer(f_fac * p.reg.weights),
        box=p.box,
        x0=p.x0,
    )
    return scaled, info


def add_slacks(
    name: str,
    n: int,
    f_eval: Callable,
    g_eval: Callable,
    cE_eval: Optional[Callable],
    JE_eval: Optional[Callable],
    cI_eval: Optional[Callable],
    JI_eval: Optional[Callable],
    m_eq: int,
    m_ineq: int,
    x_lower,
    x_upper,
    c_lower=None,
    c_upper=None,
    l1_weights=None,
) -> ProblemInstance:
    """Reformulate  cE(x)=0, c_lower <= cI(x) <= c_upper  over (x, s).

    The output instance has equality constraints [cE(x); cI(x) - s] = 0 and
    box [x_lower; c_lower] <= (x, s) <= [x_upper; c_upper].  Regularizer
    weights are extended by zeros on the slack block.
    """
    x_lower = _as_float_array(x_lower, n)
    x_upper = _as_float_array(x_upper, n)
    w = np.zeros(n) if l1_weights is None else _as_float_array(l1_weights, n)

    if m_ineq == 0:
        return ProblemInstance(
            name=name,
            n=n,
            m=m_eq,
            f_eval=f_eval,
            g_eval=g_eval,
            c_eval=(cE_eval if m_eq else (lambda x: np.zeros(0))),
            J_eval=(JE_eval if m_eq else (lambda x: np.zeros((0, n)))),
            reg=L1Regularizer(w),
            box=BoxSet(x_lower, x_upper),
        )

    c_lower = _as_float_array(c_lower, m_ineq)
    c_upper = _as_float_array(c_upper, m_ineq)
    if np.any(c_lower > c_upper):
        raise ValueError("inequality bounds have c_lower_i > c_upper_i")

    n_tot = n + m_ineq
    m_tot = m_eq + m_ineq

    def c_all(z):
        x, s = z[:n], z[n:]
        parts = []
        if m_eq:
            parts.append(np.asarray(cE_eval(x), dtype=float).reshape(m_eq))
        parts.append(np.asarray(cI_eval(x), dtype=float).reshape(m_ineq) - s)
        return np.concatenate(parts)

    def J_all(z):
        x = z[:n]
        Jm = np.zeros((m_tot, n_tot))
        if m_eq:
            Jm[:m_eq, :n] = np.asarray(JE_eval(x), dtype=float).reshape(m_eq, n)
        Jm[m_eq:, :n] = np.asarray(JI_eval(x), dtype=float).reshape(m_ineq, n)
        Jm[m_eq:, n:] = -np.eye(m_ineq)
        return Jm

    return ProblemInstance(
        name=name,
        n=n_tot,
        m=m_tot,
        f_eval=lambda z: f_eval(z[:n]),
        g_eval=lambda z: np.concatenate([np.asarray(g_eval(z[:n]), dtype=float), np.zeros(m_ineq)]),
        c_eval=c_all,
        J_eval=J_all,
        reg=L1Regularizer(np.concatenate([w, np.zeros(m_ineq)])),
        box=BoxSet(np.concatenate([x_lower, c_lower]), np.concatenate([x_upper, c_upper])),
    )


# --- JSON problem files -----------------------------------------------------
#
# {
#   "name": str,
#   "kind": "quadratic" | "scca" | "analytic:<id>",
#   "n": int, "m": int,
#   "data": {...},                    # kind-specific, dense matrices row-major
#   "l1_weights": [...],              # optional, zeros if absent
#   "box": {"lower": [...], "upper": [...]}   # "-inf"/"inf" sentinels allowed
# }
#
# kind "quadratic": data has Q (n x n), c (n), optionally A (m x n), b (m),
#   const, x0; objective f(x) = 0.5 x'Qx + c'x + const, constraints Ax - b = 0.
# kind "scca": data has n_x, n_y, N, seed, lam; the instance is generated.
# kind "analytic:<id>": <id> names a built-in corpus instance.


def _bound_from_json(v):
    out = []
    for t in v:
        if t == "inf":
            out.append(np.inf)
        elif t == "-inf":
            out.append(-np.inf)
        else:
            out.append(float(t))
    return np.array(out)


def _bound_to_json(v):
    out = []
    for t in v:
        if np.isposinf(t):
            out.append("inf")
        elif np.isneginf(t):
            out.append("-inf")
        else:
            out.append(float(t))
    return out


def load_problem(source) -> ProblemInstance:
    """Build a ProblemInstance from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            spec = json.load(fh)
    else:
        spec = source
    kind = spec.get("kind", "quadratic")

    if kind.startswith("analytic:"):
        from . import corpus

        return corpus.get_instance(kind.split(":", 1)[1]).problem

    if kind == "scca":
        from . import scca

        d = spec["data"]
        data = scca.scca_generate(int(d["n_x"]), int(d["n_y"]), int(d["N"]), int(d["seed"]))
        return scca.scca_problem(data, float(d["lam"]))

    if kind != "quadratic":
        raise ValueError(f"unknown problem kind {kind!r}")

    n = int(spec["n"])
    m = int(spec.get("m", 0))
    d = spec["data"]
    Q = np.asarray(d["Q"], dtype=float).reshape(n, n)
    lin = np.asarray(d["c"], dtype=float).reshape(n)
    const = float(d.get("const", 0.0))
    if m:
        A = np.asarray(d["A"], dtype=float).reshape(m, n)
        b = np.asarray(d["b"], dtype=float).reshape(m)
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
    w = np.asarray(spec.get("l1_weights", np.zeros(n)), dtype=float)
    box_spec = spec.get("box")
    if box_spec is None:
        box = BoxSet.free(n)
    else:
        box = BoxSet(_bound_from_json(box_spec["lower"]), _bound_from_json(box_spec["upper"]))
    x0 = np.asarray(d["x0"], dtype=float) if "x0" in d else None

    return ProblemInstance(
        name=spec.get("name", "quadratic"),
        n=n,
        m=m,
        f_eval=lambda x: 0.5 * float(x @ Q @ x) + float(lin @ x) + const,
        g_eval=lambda x: Q @ x + lin,
        c_eval=lambda x: A @ x - b,
        J_eval=lambda x: A.copy(),
        reg=L1Regularizer(w),
        box=box,
        x0=x0,
    )


def problem_to_dict(name, Q, lin, A=None, b=None, l1_weights=None, box: Optional[BoxSet] = None,
                    x0=None, const: float = 0.0) -> dict:
    """Serialize a quadratic problem to the JSON problem-file schema."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    data = {"Q": Q.tolist(), "c": np.asarray(lin, dtype=float).tolist(), "const": const}
    m = 0
    if A is not None:
        A = np.asarray(A, dtype=float)
        m = A.shape[0]
        data["A"] = A.tolist()
        data["b"] = np.asarray(b, dtype=float).tolist()
    if x0 is not None:
        data["x0"] = np.asarray(x0, dtype=float).tolist()
    out = {"name": name, "kind": "quadratic", "n": n, "m": m, "data": data}
    if l1_weights is not None:
        out["l1_weights"] = np.asarray(l1_weights, dtype=float).tolist()
    if box is not None:
        out["box"] = {"lower": _bound_to_json(box.lower), "upper": _bound_to_json(box.upper)}
    return out
