"""Behaviour of designs as the nonlinear parameters collapse, b_i = x + delta * r_i.

As delta -> 0 the inverse information matrix blows up like delta^(-(4k-2))
along a fixed rank-one direction, and E- and c-optimal designs converge to
the e_m-optimal design of the limiting system (h, phi, phi', ..., phi^(2k-1))
evaluated at x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .design import Design, cheb_weights, chebyshev_solution, design_c, design_estar, info_matrix
from .errors import ChebDesignError, ParameterError, PreconditionError, RankError
from .model import ModelSpec, check_parameter, limiting_system

__all__ = [
    "CollapseSpec",
    "DEFAULT_DELTAS",
    "gamma_tilde",
    "gamma_bar",
    "limiting_design",
    "h_const",
    "ExpansionRow",
    "expansion_check",
    "inverse_polynomial_residuals",
    "ConvergenceRow",
    "convergence_check_designs",
    "design_distance",
]

DEFAULT_DELTAS = (0.4, 0.2, 0.1, 0.05)
MAX_K = 8
SINGULAR_RCOND = 1e-15


@dataclass(frozen=True)
class CollapseSpec:
    """Parameters ``b_i = x + delta * r_i`` with strictly increasing r."""

    x: float
    r: tuple
    delta: float

    def __post_init__(self):
        r = tuple(float(v) for v in self.r)
        if len(r) < 1:
            raise ParameterError("r must be non-empty")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ParameterError("r must be strictly increasing")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def b(self) -> tuple:
        return tuple(self.x + self.delta * ri for ri in self.r)

    def valid_for(self, model: ModelSpec) -> bool:
        try:
            for bi in self.b:
                check_parameter(model.basis, bi, model.interval)
        except ParameterError:
            return False
        return True


def _check_r(r: Sequence[float]) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise ParameterError("r must be a non-empty vector")
    if np.unique(r).size != r.size:
        raise ParameterError("r must have distinct entries")
    return r


def _gamma_pairs(r: np.ndarray):
    k = r.size
    even = np.empty(k)
    odd = np.empty(k)
    for i in range(k):
        d = r[i] - np.delete(r, i)
        even[i] = np.prod(d ** -2.0)
        odd[i] = -even[i] * np.sum(2.0 / d) + 0.0
    return odd, even


def gamma_tilde(r: Sequence[float], s: int = 0) -> np.ndarray:
    """(0,...,0, g_1, ..., g_2k) with g_2i = prod_{j!=i} (r_i-r_j)^-2 and
    g_{2i-1} = -g_2i * sum_{j!=i} 2/(r_i-r_j)."""
    odd, even = _gamma_pairs(_check_r(r))
    tail = np.empty(2 * odd.size)
    tail[0::2] = odd
    tail[1::2] = even
    return np.concatenate([np.zeros(s), tail])


def gamma_bar(r: Sequence[float], s: int = 0) -> np.ndarray:
    """The direction of the leading term of the inverse information matrix.

    Equal to ``gamma_tilde`` with the even-position entries of the tail and
    the leading s entries set to zero.
    """
    out = gamma_tilde(r, s)
    out[s + 1 :: 2] = 0.0
    return out


def limiting_design(model: ModelSpec, x: float, c: Optional[Sequence[float]] = None) -> Design:
    """c-optimal candidate (default c = e_m) for the limiting system at x."""
    system = limiting_system(model, x)
    if c is None:
        c = np.zeros(model.m)
        c[-1] = 1.0
    c = np.asarray(c, dtype=float)
    sol = chebyshev_solution(system)
    w = cheb_weights(system(sol.points), c, "general")
    keep = w > 0
    return Design(sol.points[keep], w[keep] / w[keep].sum())


def _limiting_info(model: ModelSpec, design: Design, x: float) -> np.ndarray:
    F = limiting_system(model, x)(design.support)
    return (F * design.weights) @ F.T


def h_const(model: ModelSpec, design: Design, x: float) -> float:
    """((2k-1)!)^2 times the (m, m) entry of the inverse limiting information matrix."""
    if model.k > MAX_K:
        raise ParameterError(f"k = {model.k} exceeds the supported maximum {MAX_K}")
    Mbar = _limiting_info(model, design, x)
    vals = np.linalg.eigvalsh(Mbar)
    if vals[0] <= SINGULAR_RCOND * vals[-1] * Mbar.shape[0]:
        raise RankError("limiting information matrix is singular")
    inv_mm = np.linalg.solve(Mbar, np.eye(model.m)[:, -1])[-1]
    return float(math.factorial(2 * model.k - 1) ** 2) * float(inv_mm)


@dataclass(frozen=True)
class ExpansionRow:
    delta: float
    error: float
    flagged: bool = False


def expansion_check(
    model: ModelSpec,
    x: float,
    r: Sequence[float],
    design: Design,
    delta_list: Sequence[float] = DEFAULT_DELTAS,
) -> list:
    """Error of the leading-order expansion of the inverse information matrix.

    For each delta reports ``max |delta^(4k-2) M^{-1}(xi, b) - h gbar gbar^T|``
    with ``b = x + delta r``.  Rows whose information matrix is numerically
    singular are flagged and carry ``nan``.
    """
    r = _check_r(r)
    if r.size != model.k:
        raise ParameterError(f"r has {r.size} entries, model has k = {model.k}")
    if len(design) < model.m:
        raise ParameterError(f"design needs at least m = {model.m} support points")
    g = gamma_bar(r, model.s)
    lead = h_const(model, design, x) * np.outer(g, g)
    power = 4 * model.k - 2
    rows = []
    for delta in delta_list:
        spec = CollapseSpec(x, tuple(r), delta)
        m_b = model.with_b(spec.b)
        M = info_matrix(m_b, design)
        vals = np.linalg.eigvalsh(M)
        if vals[0] <= SINGULAR_RCOND * vals[-1] * M.shape[0]:
            rows.append(ExpansionRow(float(delta), math.nan, True))
            continue
        scaled = delta**power * np.linalg.inv(M)
        rows.append(ExpansionRow(float(delta), float(np.max(np.abs(scaled - lead)))))
    return rows


def inverse_polynomial_residuals(r: Sequence[float], delta: float, probes: int = 7) -> dict:
    """Self-test of the inverse confluent Vandermonde construction.

    With ``d_i = delta r_i``, L has rows ``psi(d_i)`` and ``psi'(d_i)`` for
    ``psi(u) = (1, u, ..., u^(2k-1))``, and V = L^{-1}.  The columns of V are
    the Hermite basis polynomials.  Returns the largest deviation of
    ``v_2i^T psi`` and ``v_{2i-1}^T psi`` from their closed forms on probe
    points, together with the interpolation conditions ``L V = I``.
    """
    r = _check_r(r)
    k = r.size
    d = delta * r
    n = 2 * k
    powers = np.arange(n)

    def psi(u):
        return np.asarray(u, dtype=float)[..., None] ** powers

    def dpsi(u):
        u = np.asarray(u, dtype=float)[..., None]
        return powers * np.where(powers > 0, u ** np.maximum(powers - 1, 0), 0.0)

    L = np.empty((n, n))
    L[0::2] = psi(d)
    L[1::2] = dpsi(d)
    V = np.linalg.inv(L)
    span = max(float(np.ptp(d)), delta)
    u = np.linspace(d.min() - 0.5 * span, d.max() + 0.5 * span, probes)
    P = psi(u) @ V  # P[:, j] = v_j^T psi(u)

    dev_even = dev_odd = 0.0
    for i in range(k):
        others = np.delete(d, i)
        q_even = (u - d[i]) * np.prod(((u[:, None] - others) / (others - d[i])) ** 2, axis=1)
        q = np.prod(((u[:, None] - others) / (d[i] - others)) ** 2, axis=1)
        total = np.sum(2.0 / (d[i] - others))
        if total == 0.0:
            # no linear factor: the polynomial reduces to the product term
            q_odd = q
        else:
            alpha = d[i] + 1.0 / total
            q_odd = (u - alpha) / (d[i] - alpha) * q
        dev_even = max(dev_even, float(np.max(np.abs(P[:, 2 * i + 1] - q_even))))
        dev_odd = max(dev_odd, float(np.max(np.abs(P[:, 2 * i] - q_odd))))
    return {
        "even": dev_even,
        "odd": dev_odd,
        "identity": float(np.max(np.abs(L @ V - np.eye(n)))),
    }


def design_distance(a: Design, b: Design) -> float:
    """max_i |s_i - s'_i| + |w_i - w'_i| over index-matched support points."""
    if len(a) != len(b):
        return math.inf
    return float(np.max(np.abs(a.support - b.support) + np.abs(a.weights - b.weights)))


@dataclass(frozen=True)
class ConvergenceRow:
    delta: float
    dist_estar: float
    dist_c: float
    error: Optional[str] = None


def convergence_check_designs(
    model: ModelSpec,
    x: float,
    r: Sequence[float],
    delta_list: Sequence[float] = DEFAULT_DELTAS,
    c: Optional[Sequence[float]] = None,
) -> list:
    """Distances of the E-candidate and c-candidate designs to the limit design.

    Both designs at ``b = x + delta r`` should approach the e_m-optimal
    design of the limiting system as delta shrinks, provided ``c^T gamma_tilde
    != 0`` for the c-branch (default c = e_m).
    """
    r = _check_r(r)
    if r.size != model.k:
        raise ParameterError(f"r has {r.size} entries, model has k = {model.k}")
    if c is None:
        c = np.zeros(model.m)
        c[-1] = 1.0
    c = np.asarray(c, dtype=float)
    g = gamma_tilde(r, model.s)
    if abs(c @ g) <= 1e-12 * np.linalg.norm(c) * np.linalg.norm(g):
        raise PreconditionError(
            "c^T gamma_tilde = 0: the sum over l != j of 1/(r_j - r_l) vanishes for the targeted index"
        )
    limit = limiting_design(model, x)
    rows = []
    for delta in delta_list:
        spec = CollapseSpec(x, tuple(r), delta)
        try:
            m_b = model.with_b(spec.b)
            d_e = design_estar(m_b)
            d_c = design_c(m_b, c)
        except ChebDesignError as exc:
            rows.append(ConvergenceRow(float(delta), math.nan, math.nan, str(exc)))
            continue
        rows.append(ConvergenceRow(float(delta), design_distance(d_e, limit), design_distance(d_c, limit)))
    return rows
