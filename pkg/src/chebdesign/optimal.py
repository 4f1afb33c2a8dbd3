"""Optimality verification, efficiencies and brute-force design oracles."""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import optimize

from .cheb import ChebyshevSolution
from .design import (
    Design,
    ModelOrSystem,
    chebyshev_solution,
    design_c,
    design_estar,
    info_matrix,
    regression_vectors,
)
from .errors import ChebDesignError, EstimabilityError, ParameterError, RankError
from .model import FunctionSystem, Interval, ModelSpec

__all__ = [
    "Verdict",
    "VerificationReport",
    "sym_eigen",
    "verify_E",
    "verify_c",
    "c_variance",
    "efficiency",
    "brute_force_E",
    "brute_force_c",
    "SweepRow",
    "eig_ratio_sweep",
]

log = logging.getLogger(__name__)

VERIFY_GRID = 10_000
DIRECTIONAL_TOL = 1e-6
MULTIPLICITY_TOL = 1e-8
PINV_RCOND = 1e-14
ESTIMABLE_TOL = 1e-8
# relative size below which lambda_min counts as zero; the Rayleigh
# quotients used for it are accurate far below machine epsilon
SINGULAR_RCOND = 1e-24


class Verdict(str, enum.Enum):
    OPTIMAL = "optimal"
    NOT_OPTIMAL = "not-optimal"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerificationReport:
    criterion: str
    verdict: Verdict
    lambda_min: float
    lambda_2: float
    lambda_cstar: Optional[float]
    max_violation: float
    argmax_point: float
    multiplicity: int
    variance: Optional[float] = None

    @property
    def ratio(self) -> float:
        """lambda_(2) / lambda_{c*}; at least 1 when the c*-design is E-optimal."""
        return self.lambda_2 / self.lambda_cstar

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        return d


def sym_eigen(M: np.ndarray):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError("matrix must be square")
    scale = max(np.max(np.abs(M)), np.finfo(float).tiny)
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise ParameterError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    return vals, vecs


def _interval(model: ModelOrSystem) -> Interval:
    return model.interval


def _check_grid(model: ModelOrSystem, design: Design, grid_size: int) -> np.ndarray:
    return np.union1d(_interval(model).grid(grid_size), design.support)


def verify_E(
    model: ModelOrSystem,
    design: Design,
    grid_size: int = VERIFY_GRID,
    tol: float = DIRECTIONAL_TOL,
    solution: Optional[ChebyshevSolution] = None,
    mode: str = "linearized",
) -> VerificationReport:
    """Check E-optimality with the equivalence theorem.

    With z a unit eigenvector for lambda_min, the design is E-optimal if
    ``(z^T f(t))^2 <= lambda_min`` on the whole interval.  The Rayleigh
    quotient lambda_{c*} of the Chebyshev vector must also not exceed the
    second eigenvalue.  When lambda_min is multiple, each eigenvector of
    the eigenspace, their uniform mixture and the projection of c* are
    tried as certificates; if none works the verdict is inconclusive.
    Eigenvalues are recomputed as Rayleigh quotients ``sum_j w_j (v^T
    f(t_j))^2``, which stay accurate when lambda_min is far below
    machine epsilon times lambda_max.
    """
    M = info_matrix(model, design, mode)
    vals, vecs = sym_eigen(M)
    Fs = regression_vectors(model, design.support)
    t = _check_grid(model, design, grid_size)
    F = regression_vectors(model, t)
    if mode == "nonlinear":
        from .model import ka_matrix

        kinv = np.diag(1.0 / np.diag(ka_matrix(model)))
        Fs, F = kinv @ Fs, kinv @ F

    def rayleigh(v: np.ndarray) -> float:
        # sum of squares: no cancellation for tiny eigenvalues of huge-norm M
        return float(design.weights @ (v @ Fs) ** 2 / (v @ v))

    vals = np.array([rayleigh(vecs[:, i]) for i in range(vals.size)])
    lam = vals[0]
    if lam <= SINGULAR_RCOND * max(vals.max(), np.finfo(float).tiny):
        raise RankError(f"information matrix is singular (eigenvalues {vals})")
    m = vals.size
    lam2 = float(np.min(vals[1:])) if m > 1 else np.inf
    mult = int(np.sum(vals - lam <= MULTIPLICITY_TOL * max(1.0, lam)))

    sol = solution or chebyshev_solution(model)
    cstar = sol.coeffs
    lam_c = rayleigh(cstar)

    def slack(E_basis: np.ndarray, mix: np.ndarray):
        proj = E_basis.T @ F
        d = (mix[:, None] * proj**2).sum(axis=0) / lam
        j = int(np.argmax(d))
        return float(d[j] - 1.0), float(t[j])

    eig_space = vecs[:, :mult]
    candidates = [(eig_space[:, [i]], np.ones(1)) for i in range(mult)]
    if mult > 1:
        candidates.append((eig_space, np.full(mult, 1.0 / mult)))
        pc = eig_space @ (eig_space.T @ cstar)
        if np.linalg.norm(pc) > 1e-12 * np.linalg.norm(cstar):
            candidates.append(((pc / np.linalg.norm(pc))[:, None], np.ones(1)))
    if abs(lam_c - lam) <= tol * lam:
        # c* attains lambda_min, so it lies in the minimal eigenspace; it is
        # known to full precision, unlike a computed eigenvector of a badly
        # conditioned M
        candidates.append(((cstar / np.linalg.norm(cstar))[:, None], np.ones(1)))
    slacks = [slack(E, w) for E, w in candidates]
    viol, arg = min(slacks)

    if viol <= tol and lam_c <= lam2 * (1 + tol):
        verdict = Verdict.OPTIMAL
    elif mult > 1:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.NOT_OPTIMAL
    return VerificationReport("E", verdict, float(lam), float(lam2), lam_c, viol, arg, mult)


def _ginv_apply(M: np.ndarray, c: np.ndarray) -> np.ndarray:
    """M^+ c, raising ``EstimabilityError`` if c leaves the range of M."""
    vals, vecs = sym_eigen(M)
    rank_tol = PINV_RCOND * max(abs(vals[-1]), 1e-300) * M.shape[0]
    live = vals > rank_tol
    proj = vecs.T @ c
    if np.linalg.norm(proj[~live]) > ESTIMABLE_TOL * np.linalg.norm(c):
        raise EstimabilityError("c is not estimable under this design")
    return vecs[:, live] @ (proj[live] / vals[live])


def c_variance(model: ModelOrSystem, design: Design, c: Sequence[float]) -> float:
    """c^T M^- c, raising ``EstimabilityError`` if c is not in range(M)."""
    c = np.asarray(c, dtype=float)
    return float(c @ _ginv_apply(info_matrix(model, design), c))


def _elfving_certificate(model: ModelOrSystem, design: Design, c: np.ndarray, var: float, t: np.ndarray):
    """Sup-norm of the best supporting hyperplane for a singular design.

    ``c / sqrt(var) = sum_j w_j eps_j f(t_j)`` must hold with signs eps_j;
    the design is then c-optimal iff some h with ``h^T f(t_j) = eps_j``
    satisfies ``|h^T f(t)| <= 1`` on the design space.  Returns the excess
    over one of the minimal sup-norm and the point where it is attained.
    """
    Fs = regression_vectors(model, design.support)
    v, *_ = np.linalg.lstsq(Fs, c / np.sqrt(var), rcond=None)
    eps = v / design.weights
    if np.linalg.norm(Fs @ v - c / np.sqrt(var)) > 1e-8 * np.linalg.norm(c) / np.sqrt(var) or np.max(
        np.abs(np.abs(eps) - 1.0)
    ) > 1e-6:
        # the weights are not Elfving weights on this support
        return np.inf, float(design.support[0])
    F = regression_vectors(model, t)
    m, n = F.shape
    # variables (h, s): minimize s with -s <= h^T f(t_i) <= s
    A_ub = np.vstack([np.hstack([F.T, -np.ones((n, 1))]), np.hstack([-F.T, -np.ones((n, 1))])])
    res = optimize.linprog(
        np.r_[np.zeros(m), 1.0],
        A_ub=A_ub,
        b_ub=np.zeros(2 * n),
        A_eq=np.hstack([Fs.T, np.zeros((Fs.shape[1], 1))]),
        b_eq=np.sign(eps),
        bounds=[(None, None)] * m + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        return np.inf, float(design.support[0])
    h = res.x[:m]
    g = np.abs(h @ F)
    j = int(np.argmax(g))
    return float(g[j] - 1.0), float(t[j])


def verify_c(
    model: ModelOrSystem,
    design: Design,
    c: Sequence[float],
    grid_size: int = VERIFY_GRID,
    tol: float = DIRECTIONAL_TOL,
) -> VerificationReport:
    """Check c-optimality: ``(f(t)^T M^- c)^2 <= c^T M^- c`` for all t.

    For a singular information matrix the inequality depends on the choice
    of generalized inverse, so the check uses a supporting hyperplane of
    the Elfving set found by linear programming instead.
    """
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        raise ParameterError("c must be nonzero")
    M = info_matrix(model, design)
    vals, _ = sym_eigen(M)
    v = _ginv_apply(M, c)
    var = float(c @ v)
    t = _check_grid(model, design, grid_size)
    lam = float(vals[0])
    lam2 = float(vals[1]) if vals.size > 1 else np.inf
    mult = int(np.sum(vals - lam <= MULTIPLICITY_TOL * max(1.0, lam)))
    if lam <= PINV_RCOND * vals[-1] * M.shape[0]:
        viol, arg = _elfving_certificate(model, design, c, var, t)
    else:
        d = (v @ regression_vectors(model, t)) ** 2 / var - 1.0
        j = int(np.argmax(d))
        viol, arg = float(d[j]), float(t[j])
    verdict = Verdict.OPTIMAL if viol <= tol else Verdict.NOT_OPTIMAL
    return VerificationReport("c", verdict, lam, lam2, None, viol, arg, mult, var)


# ---------------------------------------------------------------------------
# Brute-force oracles on candidate grids


def _refined_grid(interval: Interval, base: np.ndarray, active: np.ndarray, width: float, n_local: int):
    u_act = interval.to_unit(active)
    pieces = [base]
    for u in u_act:
        lo, hi = max(u - width, 0.0), u + width
        hi = min(hi, 1.0) if interval.bounded else min(hi, 1.0 - 1e-9)
        pieces.append(interval.from_unit(np.linspace(lo, hi, n_local)))
    return np.unique(np.concatenate(pieces))


def _lp_elfving(F: np.ndarray, c: np.ndarray):
    """min sum|u_j| subject to F u = c (Elfving's theorem as a linear program)."""
    m, n = F.shape
    scale = np.linalg.norm(F, axis=1)
    scale[scale == 0] = 1.0
    A = np.hstack([F, -F]) / scale[:, None]
    res = optimize.linprog(
        np.ones(2 * n), A_eq=A, b_eq=c / scale, bounds=(0, None), method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise ChebDesignError(f"Elfving linear program failed: {res.message}")
    return res.x[:n] - res.x[n:]


def _design_from_masses(t: np.ndarray, mass: np.ndarray, prune: float) -> Design:
    w = np.abs(mass)
    w = w / w.sum()
    keep = w > prune
    return Design(t[keep], w[keep] / w[keep].sum())


def brute_force_c(
    model: ModelOrSystem,
    c: Sequence[float],
    grid_size: int = 2000,
    rounds: int = 5,
) -> Design:
    """c-optimal design on a grid via Elfving's theorem as a linear program.

    The minimal l1-norm representation ``c = sum_j u_j f(t_j)`` gives the
    c-optimal design ``w_j = |u_j| / sum|u|`` with ``c^T M^- c = (sum|u|)^2``.
    Active points are refined by local grids over several rounds.
    """
    c = np.asarray(c, dtype=float)
    interval = _interval(model)
    base = interval.grid(grid_size)
    t = base
    width = 2.0 / grid_size
    for _ in range(rounds):
        u = _lp_elfving(regression_vectors(model, t), c)
        active = t[np.abs(u) > 1e-9 * np.abs(u).sum()]
        t = _refined_grid(interval, base, active, width, 41)
        width /= 10.0
    u = np.abs(_lp_elfving(regression_vectors(model, t), c))
    pts, _ = _clusters(interval, t, u, 1e-9, gap=4.0 / grid_size)
    u = _lp_elfving(regression_vectors(model, pts), c)
    return _design_from_masses(pts, u, 1e-9)


def _sdp_e_weights(F: np.ndarray) -> np.ndarray:
    import cvxpy as cp

    m, n = F.shape
    outer = np.einsum("in,jn->ijn", F, F).reshape(m * m, n)
    scale = m / np.sum(F * F) * n
    w = cp.Variable(n, nonneg=True)
    M = cp.reshape(scale * outer @ w, (m, m), order="C")
    prob = cp.Problem(cp.Maximize(cp.lambda_min(0.5 * (M + M.T))), [cp.sum(w) == 1])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12, max_iter=500)
    if w.value is None:
        raise ChebDesignError(f"E-optimal SDP failed: {prob.status}")
    return np.maximum(np.asarray(w.value), 0.0)


def _clusters(interval: Interval, t: np.ndarray, w: np.ndarray, prune: float, gap: float):
    """Merge runs of nearby active grid points into single support points."""
    w = w / w.sum()
    act = np.flatnonzero(w > prune)
    u = interval.to_unit(t[act])
    groups = np.split(np.arange(act.size), np.flatnonzero(np.diff(u) > gap) + 1)
    pts, mass = [], []
    for g in groups:
        wg = w[act[g]]
        pts.append(float(interval.from_unit(np.sum(u[g] * wg) / wg.sum())))
        mass.append(float(wg.sum()))
    return np.array(pts), np.array(mass)


def _lambda_min_on(model, interval, u: np.ndarray):
    F = regression_vectors(model, interval.from_unit(u))
    w = _sdp_e_weights(F)
    M = (F * w) @ F.T
    return float(np.linalg.eigvalsh(M)[0]), w


def brute_force_E(
    model: ModelOrSystem,
    grid_size: int = 400,
    rounds: int = 3,
    prune: float = 1e-6,
    polish_steps: int = 8,
) -> Design:
    """E-optimal design on a grid, independent of any Chebyshev construction.

    Maximizes lambda_min(M(w)) over weights on a compactified grid by
    semidefinite programming and refines the grid around active points.
    Mass below ``prune`` is dropped, nearby active points are merged, and
    the merged support is polished by coordinate search in compactified
    coordinates (weights re-optimized at every trial move).
    """
    interval = _interval(model)
    base = interval.grid(grid_size)
    t = base
    width = 2.0 / grid_size
    for _ in range(rounds):
        w = _sdp_e_weights(regression_vectors(model, t))
        centers, _ = _clusters(interval, t, w, 1e-4 * w.max() / w.sum(), gap=2.0 * width)
        t = _refined_grid(interval, base, centers, width, 41)
        width /= 10.0
    w = _sdp_e_weights(regression_vectors(model, t))
    # solver noise smears mass over neighbours: keep one point per run of
    # substantial weight and re-optimize the weights on those points
    pts, _ = _clusters(interval, t, w, 1e-3 * w.max() / w.sum(), gap=2.5 / grid_size)

    u = interval.to_unit(pts)
    upper = 1.0 if interval.bounded else 1.0 - 1e-9
    best, w = _lambda_min_on(model, interval, u)
    step = 1.0 / grid_size
    for _ in range(polish_steps):
        improved = False
        for i in range(u.size):
            for direction in (-1.0, 1.0):
                trial = u.copy()
                trial[i] = min(max(trial[i] + direction * step, 0.0), upper)
                if np.any(np.diff(trial) <= 0) or trial[i] == u[i]:
                    continue
                val, wt = _lambda_min_on(model, interval, trial)
                if val > best:
                    best, u, w, improved = val, trial, wt, True
        if not improved:
            step /= 2.0
    keep = w > prune * w.sum()
    return Design(interval.from_unit(u[keep]), w[keep] / w[keep].sum())


# ---------------------------------------------------------------------------
# Efficiencies


def efficiency(
    model: ModelOrSystem,
    design: Design,
    i: int,
    reference: Optional[Design] = None,
) -> float:
    """Efficiency of ``design`` for estimating coefficient i (1-based).

    ``(e_i^T M^-(ref) e_i) / (e_i^T M^-(design) e_i)`` where ref is the
    e_i-optimal design: the Chebyshev candidate if it verifies, otherwise
    the linear-programming oracle.
    """
    m = _dimension(model)
    if not 1 <= i <= m:
        raise ParameterError(f"coordinate {i} out of range 1..{m}")
    e = np.zeros(m)
    e[i - 1] = 1.0
    if reference is None:
        reference = optimal_reference(model, e)
    return c_variance(model, reference, e) / c_variance(model, design, e)


def optimal_reference(model: ModelOrSystem, c: np.ndarray) -> Design:
    """Verified c-optimal design: Chebyshev candidate or oracle fallback."""
    try:
        cand = design_c(model, c)
        if verify_c(model, cand, c).verdict is Verdict.OPTIMAL:
            return cand
    except (EstimabilityError, RankError):
        pass
    log.info("Chebyshev candidate not c-optimal for c=%s; using the LP oracle", c)
    return brute_force_c(model, c)


def _dimension(model: ModelOrSystem) -> int:
    return model.m


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SweepRow:
    b: tuple
    ratio: float
    lambda_min: float
    lambda_2: float
    lambda_cstar: float
    verdict: str
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def eig_ratio_sweep(model: ModelSpec, b_values: Iterable[Sequence[float]], grid_size: int = VERIFY_GRID) -> list:
    """lambda_(2)/lambda_{c*} of the c*-design for each parameter vector.

    Rows whose parameters are invalid or whose computation fails carry an
    ``error`` message and NaN numbers; the sweep continues.
    """
    rows = []
    for b in b_values:
        b = tuple(float(v) for v in b)
        try:
            mb = model.with_b(b)
            sol = chebyshev_solution(mb)
            rep = verify_E(mb, design_estar(mb, sol), grid_size=grid_size, solution=sol)
            rows.append(SweepRow(b, rep.ratio, rep.lambda_min, rep.lambda_2, rep.lambda_cstar, rep.verdict.value))
        except ChebDesignError as exc:
            nan = float("nan")
            rows.append(SweepRow(b, nan, nan, nan, nan, "invalid", f"{type(exc).__name__}: {exc}"))
    return rows
