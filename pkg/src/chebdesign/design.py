"""Designs, information matrices and the Chebyshev-point candidate designs."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .cheb import ChebyshevSolution, remez
from .errors import NegativeWeightError, ParameterError, SingularityError
from .model import Basis, FunctionSystem, ModelSpec, eval_f, ka_matrix, linearized_system

__all__ = [
    "Design",
    "info_matrix",
    "cheb_weights",
    "chebyshev_solution",
    "design_estar",
    "design_c",
    "design_c_onepoint_k1",
    "k1_estar_weight",
    "k1_c_weight",
]

WEIGHT_CLAMP = 1e-12

SQ2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class Design:
    """Approximate design: ascending support points with positive weights."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.atleast_1d(np.asarray(self.support, dtype=float)).copy()
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if support.ndim != 1 or support.shape != weights.shape or support.size < 1:
            raise ParameterError("support and weights must be non-empty vectors of equal length")
        if np.any(np.diff(support) <= 0):
            raise ParameterError("support points must be strictly increasing")
        if np.any(weights <= 0):
            raise ParameterError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights sum to {weights.sum()!r}, not 1")
        support.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def normalized(cls, support, weights) -> "Design":
        weights = np.asarray(weights, dtype=float)
        return cls(support, weights / weights.sum())

    def __len__(self):
        return self.support.size

    def __repr__(self):
        pairs = ", ".join(f"{t:.6g}: {w:.6g}" for t, w in zip(self.support, self.weights))
        return f"Design({{{pairs}}})"

    def to_dict(self) -> dict:
        return {"support": [float(t) for t in self.support], "weights": [float(w) for w in self.weights]}

    @classmethod
    def from_dict(cls, data: dict) -> "Design":
        return cls(data["support"], data["weights"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Design":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["support", "weight"])
        for t, w in zip(self.support, self.weights):
            writer.writerow([repr(float(t)), repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Design":
        rows = list(csv.reader(io.StringIO(text)))
        body = [r for r in rows[1:] if r]
        return cls([float(r[0]) for r in body], [float(r[1]) for r in body])

    def mix(self, other: "Design", alpha: float) -> "Design":
        """The convex combination alpha * self + (1 - alpha) * other."""
        pts = np.union1d(self.support, other.support)
        w = np.zeros(pts.size)
        w[np.searchsorted(pts, self.support)] += alpha * self.weights
        w[np.searchsorted(pts, other.support)] += (1 - alpha) * other.weights
        keep = w > 0
        return Design(pts[keep], w[keep] / w[keep].sum())


ModelOrSystem = Union[ModelSpec, FunctionSystem]


def regression_vectors(model: ModelOrSystem, t) -> np.ndarray:
    """(m, n) matrix of regression vectors at the points t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(model, FunctionSystem):
        return model(t)
    return eval_f(model, t)


def info_matrix(model: ModelOrSystem, design: Design, mode: str = "linearized") -> np.ndarray:
    """Information matrix sum_j w_j f(t_j) f(t_j)^T.

    ``mode="nonlinear"`` returns K_a^{-1} M K_a^{-1}, the information matrix
    of the nonlinear model at the linear parameters ``model.a``.
    """
    F = regression_vectors(model, design.support)
    if not np.all(np.isfinite(F)):
        raise SingularityError("basis is singular at a support point")
    M = (F * design.weights) @ F.T
    M = 0.5 * (M + M.T)
    if mode == "linearized":
        return M
    if mode == "nonlinear":
        kinv = np.diag(1.0 / np.diag(ka_matrix(model)))
        return kinv @ M @ kinv
    raise ParameterError(f"unknown mode {mode!r}")


def cheb_weights(F: np.ndarray, c: np.ndarray, mode: str = "general") -> np.ndarray:
    """Weights at the Chebyshev points from F = (f_i(s_j)).

    ``estar``: ``J F^{-1} c / ||c||^2`` for the Chebyshev coefficient vector
    c; these sum to one.  ``general``: ``|J F^{-1} c|`` normalized to sum
    one, the weights minimizing c^T M^{-1} c among designs on these points.
    """
    F = np.asarray(F, dtype=float)
    c = np.asarray(c, dtype=float)
    m = F.shape[0]
    J = (-1.0) ** np.arange(1, m + 1)
    v = J * np.linalg.solve(F, c)
    if mode == "estar":
        w = v / (c @ c)
        if np.any(w < -WEIGHT_CLAMP):
            raise NegativeWeightError(f"Elfving representation has negative weights {w}")
        return np.where(w < 0, 0.0, w)
    if mode == "general":
        a = np.abs(v)
        total = a.sum()
        if total == 0:
            raise ParameterError("c must be nonzero")
        return a / total
    raise ParameterError(f"unknown weight mode {mode!r}")


_SOLUTIONS: dict = {}


def chebyshev_solution(model: ModelOrSystem) -> ChebyshevSolution:
    """Remez solution for the linearized system of ``model`` (memoized)."""
    if isinstance(model, FunctionSystem):
        return remez(model)
    if model.basis is Basis.CUSTOM:
        return remez(linearized_system(model))
    key = (model.basis, model.s, model.k, model.b, model.interval)
    sol = _SOLUTIONS.get(key)
    if sol is None:
        if len(_SOLUTIONS) > 4096:
            _SOLUTIONS.clear()
        sol = _SOLUTIONS[key] = remez(linearized_system(model))
    return sol


def _as_system(model: ModelOrSystem) -> FunctionSystem:
    return model if isinstance(model, FunctionSystem) else linearized_system(model)


def design_estar(model: ModelOrSystem, solution: Optional[ChebyshevSolution] = None) -> Design:
    """The c*-optimal design on the Chebyshev points.

    This is the E-optimal candidate: it is E-optimal whenever the minimum
    eigenvalue of its information matrix is simple and belongs to c*.
    """
    sol = solution or chebyshev_solution(model)
    F = _as_system(model)(sol.points)
    w = cheb_weights(F, sol.coeffs, "estar")
    keep = w > 0
    return Design(sol.points[keep], w[keep] / w[keep].sum())


def design_c(model: ModelOrSystem, c: Sequence[float], solution: Optional[ChebyshevSolution] = None) -> Design:
    """Candidate c-optimal design: Chebyshev points, weights minimizing c^T M^{-1} c.

    Points that receive zero weight are dropped.
    """
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        raise ParameterError("c must be nonzero")
    sol = solution or chebyshev_solution(model)
    F = _as_system(model)(sol.points)
    w = cheb_weights(F, c, "general")
    keep = w > WEIGHT_CLAMP * w.max()
    return Design(sol.points[keep], w[keep] / w[keep].sum())


# ---------------------------------------------------------------------------
# Closed forms for the one-term rational model 1/(t-b), 1/(t-b)^2 on [0, inf)


def _check_k1(model: ModelSpec) -> float:
    if model.basis is not Basis.RATIONAL or model.s != 0 or model.k != 1:
        raise ParameterError("closed forms need the rational model with s=0, k=1")
    if model.interval.lower != 0.0 or model.interval.bounded:
        raise ParameterError("closed forms need the interval [0, inf)")
    b = model.b[0]
    if b >= 0:
        raise ParameterError("closed forms need b < 0")
    return b


def k1_estar_weight(b: float) -> float:
    """Mass at t = 0 of the E-optimal design for 1/(t-b), 1/(t-b)^2."""
    b2 = b * b
    return 0.5 * (2 - SQ2) * (6 - 4 * SQ2 + b2) / (b2 + 12 - 8 * SQ2)


def k1_c_weight(b: float, c: Sequence[float]) -> float:
    """Mass at t = 0 of the two-point candidate design for c.

    Written for the regression functions 1/(t-b), +1/(t-b)^2, i.e. the
    expression for the -1/(t-b)^2 convention with c_2 replaced by -c_2.
    """
    c1, c2 = float(c[0]), -float(c[1])
    top = abs(b * (-SQ2 * c1 + (2 + SQ2) * c2 * b))
    bottom = abs(b * (abs(-SQ2 * c1 + (2 + SQ2) * c2 * b) + (4 + 3 * SQ2) * abs(-c1 + c2 * b)))
    return top / bottom


def design_c_onepoint_k1(model: ModelSpec, c: Sequence[float]) -> tuple:
    """c-optimal design for 1/(t-b), 1/(t-b)^2 on [0, inf) in closed form.

    Returns ``("one-point", design)`` when c is proportional to f(t) for a
    point t on the curved part of the Elfving set boundary, which happens iff
    ``c_2/c_1`` lies in ``[1/((1+sqrt 2)|b|), 1/|b|]``; the point is then
    ``t = b + c_1/c_2``.  Otherwise returns ``("chebyshev", design)`` with the
    two-point design on ``{0, sqrt(2)|b|}``.
    """
    b = _check_k1(model)
    c1, c2 = float(c[0]), float(c[1])
    if c1 == 0 and c2 == 0:
        raise ParameterError("c must be nonzero")
    if c1 != 0 and c2 != 0:
        ratio = c2 / c1
        lo, hi = 1.0 / ((1 + SQ2) * abs(b)), 1.0 / abs(b)
        if lo - 1e-15 <= ratio <= hi + 1e-15:
            t = max(b + c1 / c2, 0.0)
            return "one-point", Design([t], [1.0])
    w1 = k1_c_weight(b, (c1, c2))
    pts, ws = [0.0, SQ2 * abs(b)], [w1, 1.0 - w1]
    keep = [w > 0 for w in ws]
    return "chebyshev", Design([p for p, k in zip(pts, keep) if k], [w for w, k in zip(ws, keep) if k])
