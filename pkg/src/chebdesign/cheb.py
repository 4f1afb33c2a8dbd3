"""Chebyshev systems, equi-oscillation and closed-form Chebyshev points."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import optimize

from .errors import (
    ChebyshevViolationError,
    InternalError,
    IterationError,
    ParameterError,
    SingularityError,
)
from .model import FunctionSystem, Interval

__all__ = [
    "ChebyshevSolution",
    "remez",
    "default_reference",
    "chebU",
    "closed_form_cheb_points",
    "ChebyshevVerdict",
    "ChebyshevCheck",
    "is_chebyshev_system",
    "cauchy_vandermonde_det",
]

log = logging.getLogger(__name__)

DEFAULT_GRID = 10_000


@dataclass(frozen=True)
class ChebyshevSolution:
    """Normalized Chebyshev polynomial c*^T f with its alternation points.

    ``coeffs^T f(points[i])`` equals ``(-1)**(i+1)`` (value -1 at the first
    point) and ``|coeffs^T f| <= 1`` on the interval.
    """

    coeffs: np.ndarray
    points: np.ndarray
    residual: float
    iterations: int = 0
    levels: np.ndarray = field(default=None, repr=False)

    def __call__(self, system: FunctionSystem, t) -> np.ndarray:
        return self.coeffs @ system(t)


def default_reference(m: int, interval: Interval) -> np.ndarray:
    """Chebyshev-Lobatto nodes in compactified coordinates."""
    if m == 1:
        return np.array([interval.lower])
    u = 0.5 * (1.0 - np.cos(np.pi * np.arange(m) / (m - 1)))
    if not interval.bounded:
        u = 0.9 * u
    return interval.from_unit(u)


def _alternating_extrema(g: np.ndarray, m: int) -> np.ndarray:
    """Indices of m alternating local extrema of g (multi-point exchange)."""
    sign = np.sign(g)
    # zeros join the preceding run
    for i in range(1, sign.size):
        if sign[i] == 0:
            sign[i] = sign[i - 1]
    starts = np.flatnonzero(np.r_[True, sign[1:] != sign[:-1]])
    ends = np.r_[starts[1:], sign.size]
    idx = [s + int(np.argmax(np.abs(g[s:e]))) for s, e in zip(starts, ends) if sign[s] != 0]
    if len(idx) < m:
        raise ChebyshevViolationError(f"found {len(idx)} alternation points, need {m}")
    idx = list(idx)
    while len(idx) > m:
        mags = np.abs(g[idx])
        i = int(np.argmin(mags))
        if i == 0 or i == len(idx) - 1:
            del idx[i]
        elif len(idx) - m == 1:
            # one surplus point: drop the smaller end, alternation is kept
            del idx[0 if mags[0] < mags[-1] else -1]
        else:
            j = i - 1 if mags[i - 1] < mags[i + 1] else i + 1
            del idx[max(i, j)]
            del idx[min(i, j)]
    return np.asarray(idx)


def _polish(system: FunctionSystem, coef: np.ndarray, t: np.ndarray, i: int) -> float:
    """Locate the extremum of coef^T f near grid point t[i] to full precision."""
    n = t.size
    g_i = float(coef @ system(t[i]))
    sgn = math.copysign(1.0, g_i)

    def slope(x):
        return float(coef @ system.dt(x)) * sgn

    lo = t[i - 1] if i > 0 else t[i]
    hi = t[i + 1] if i < n - 1 else t[i]
    lower_end = i == 0 and t[0] == system.interval.lower
    upper_end = i == n - 1 and t[-1] == system.interval.upper
    if lower_end and slope(t[0]) <= 0:
        return float(t[0])
    if upper_end and slope(t[-1]) >= 0:
        return float(t[-1])
    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo > 0 > s_hi:
        return float(optimize.brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    res = optimize.minimize_scalar(
        lambda x: -abs(float(coef @ system(x))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14}
    )
    best = float(res.x)
    return best if abs(coef @ system(best)) >= abs(g_i) else float(t[i])


def remez(
    system: FunctionSystem,
    tol: float = 1e-12,
    grid_size: int = DEFAULT_GRID,
    max_iter: int = 100,
    initial: Optional[Sequence[float]] = None,
) -> ChebyshevSolution:
    """Equi-oscillating normalized combination of a Chebyshev system.

    The coefficient of the last function is pinned to 1 while iterating, so
    each step solves the square system ``sum_{i<m} a_i f_i(s_j) + f_m(s_j) =
    (-1)^j h`` on the reference ``s_1 < ... < s_m``; the reference is then
    replaced by the m alternating extrema of the error (grid scan in
    compactified coordinates followed by a root polish of the derivative).
    The result is scaled to sup-norm one with value -1 at the first point.
    """
    m = system.m
    interval = system.interval
    grid = interval.grid(grid_size)
    f_grid = system(grid)
    ref = np.sort(np.asarray(default_reference(m, interval) if initial is None else initial, dtype=float))
    if ref.size != m or np.any(np.diff(ref) <= 0) or not np.all(interval.contains(ref)):
        raise ParameterError("initial reference must be m increasing points inside the interval")
    alt = (-1.0) ** np.arange(1, m + 1)

    spread = np.inf
    for it in range(1, max_iter + 1):
        F = system(ref)
        A = np.column_stack([F[: m - 1].T, -alt])
        try:
            sol = np.linalg.solve(A, -F[m - 1])
        except np.linalg.LinAlgError as exc:
            raise ChebyshevViolationError(f"singular reference system at {ref}") from exc
        coef = np.r_[sol[: m - 1], 1.0]
        h = sol[-1]
        if h == 0 or not np.all(np.isfinite(coef)):
            raise ChebyshevViolationError("degenerate levelled error; functions are not a Chebyshev system")

        t_all = np.union1d(grid, ref)
        g_all = coef @ system(t_all)
        idx = _alternating_extrema(g_all, m)
        new_ref = np.array([_polish(system, coef, t_all, i) for i in idx])
        if np.any(np.diff(new_ref) <= 0):
            new_ref = t_all[idx]
        F_new = system(new_ref)
        levels = np.abs(coef @ F_new)
        spread = (levels.max() - abs(h)) / abs(h)
        # rounding floor of the levels: cancellation in coef^T f
        noise = 64 * np.finfo(float).eps * np.max(np.abs(coef) @ np.abs(F_new)) / abs(h)
        move = np.max(np.abs(interval.to_unit(new_ref) - interval.to_unit(ref)))
        ref = new_ref
        if move < tol or spread < max(1e-14, noise):
            break
    else:
        raise IterationError(f"remez did not converge in {max_iter} iterations", residual=spread)

    F = system(ref)
    A = np.column_stack([F[: m - 1].T, -alt])
    sol = np.linalg.solve(A, -F[m - 1])
    coeffs = np.r_[sol[: m - 1], 1.0] / sol[-1]
    g_grid = coeffs @ f_grid
    at_points = coeffs @ F
    sup = max(np.max(np.abs(g_grid)), np.max(np.abs(at_points)))
    coeffs = coeffs / sup
    g_grid = g_grid / sup
    at_points = at_points / sup
    residual = max(np.max(np.abs(np.abs(at_points) - 1.0)), max(0.0, np.max(np.abs(g_grid)) - 1.0))
    if np.any(np.sign(at_points) != alt):
        raise InternalError("alternation signs lost after normalization")
    return ChebyshevSolution(coeffs=coeffs, points=ref, residual=float(residual), iterations=it, levels=at_points)


# ---------------------------------------------------------------------------
# Closed-form Chebyshev points for s = 1 rational systems on [-1, 1]


def chebU(n: int, t):
    """Chebyshev polynomial of the second kind, with U_{-1} = 0 and
    U_{-n} = -U_{n-2} for negative indices."""
    t = np.asarray(t, dtype=float)
    if n == -1:
        return np.zeros_like(t)[()]
    if n < -1:
        return -chebU(-n - 2, t)
    prev, cur = np.zeros_like(t), np.ones_like(t)
    for _ in range(n):
        prev, cur = cur, 2 * t * cur - prev
    return cur[()]


def _tau(b: float, small: bool) -> float:
    r = math.copysign(math.sqrt(b * b - 1.0), b)
    return b - r if small else b + r


def _cheb_zero_poly(taus: Sequence[float], s: int, t: np.ndarray) -> np.ndarray:
    k = len(taus)
    d = P.polyfromroots(np.repeat(taus, 4))
    return sum(d[i] * chebU(-2 * k + s + i - 2, t) for i in range(4 * k + 1))


def _interior_zeros(fun, grid: np.ndarray) -> list:
    v = fun(grid)
    out = []
    for i in np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0):
        out.append(optimize.brentq(fun, grid[i], grid[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return out


def closed_form_cheb_points(b: Sequence[float], s: int = 1, grid_size: int = DEFAULT_GRID) -> np.ndarray:
    """Chebyshev points of {1, 1/(t-b_i), 1/(t-b_i)^2} on [-1, 1].

    They are the zeros of ``(1 - t^2) sum_i d_i U_{i-2k+s-2}(t)`` where the
    d_i are the coefficients of ``prod_i (t - tau_i)^4`` and
    ``2 b_i = tau_i + 1/tau_i``.  The root with ``|tau_i| < 1`` is tried first;
    if the zero count is wrong the reciprocal roots are tried.
    """
    if s != 1:
        raise ParameterError("closed-form Chebyshev points are available for s = 1 only")
    b = [float(v) for v in b]
    if any(abs(v) <= 1 for v in b) or len(set(b)) != len(b):
        raise ParameterError("b must be pairwise distinct and outside [-1, 1]")
    k = len(b)
    m = s + 2 * k
    # interior grid only: +-1 are zeros of the (1 - t^2) factor
    grid = np.linspace(-1.0, 1.0, grid_size)[1:-1]
    for small in (True, False):
        taus = [_tau(v, small) for v in b]
        zeros = _interior_zeros(lambda t: _cheb_zero_poly(taus, s, t), grid)
        if len(zeros) == m - 2:
            if not small:
                log.info("closed-form Chebyshev points: used reciprocal tau roots for b=%s", b)
            return np.array([-1.0, *sorted(zeros), 1.0])
        log.info("closed-form Chebyshev points: %d interior zeros with %s tau roots, expected %d",
                 len(zeros), "small" if small else "large", m - 2)
    raise InternalError(f"neither tau-root choice yields {m} Chebyshev points for b={b}")


# ---------------------------------------------------------------------------
# Chebyshev-system checks


class ChebyshevVerdict(str, enum.Enum):
    STRICT = "strict"
    WEAK = "weak"
    VIOLATED = "violated"


@dataclass(frozen=True)
class ChebyshevCheck:
    verdict: ChebyshevVerdict
    sign: int
    witness: Optional[tuple] = None
    counts: tuple = (0, 0, 0)


def is_chebyshev_system(
    system: FunctionSystem,
    trials: int = 2000,
    seed: int = 0,
    zero_tol: float = 1e-13,
) -> ChebyshevCheck:
    """Randomized check of the sign of det(f_i(x_j)) over ascending tuples.

    Tuples are drawn uniformly in compactified coordinates.  A determinant
    counts as zero when the row-equilibrated matrix has reciprocal condition
    number below ``zero_tol``, i.e. when its sign is lost to rounding.  ``witness`` holds a (positive, negative) pair of tuples
    when the verdict is ``violated``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    m = system.m
    interval = system.interval
    pos = neg = zero = 0
    first = {}
    for _ in range(trials):
        u = np.sort(rng.random(m))
        if not interval.bounded:
            u = u[u < 1.0]
        x = interval.from_unit(u)
        if x.size < m or np.any(np.diff(x) <= 0):
            continue
        F = system(x)
        det = np.linalg.det(F)
        # positive row scaling keeps the sign; the scaled matrix's
        # conditioning decides whether that sign can be trusted
        rows = F / np.linalg.norm(F, axis=1, keepdims=True)
        sv = np.linalg.svd(rows, compute_uv=False)
        if sv[-1] <= zero_tol * sv[0]:
            zero += 1
        elif det > 0:
            pos += 1
            first.setdefault(1, tuple(x))
        else:
            neg += 1
            first.setdefault(-1, tuple(x))
    counts = (pos, neg, zero)
    if pos and neg:
        return ChebyshevCheck(ChebyshevVerdict.VIOLATED, 0, (first[1], first[-1]), counts)
    sign = 1 if pos else -1 if neg else 0
    if zero:
        return ChebyshevCheck(ChebyshevVerdict.WEAK, sign, None, counts)
    return ChebyshevCheck(ChebyshevVerdict.STRICT, sign, None, counts)


def cauchy_vandermonde_det(T: Sequence[float], btilde: Sequence[float], s: int = 0) -> float:
    """Closed-form determinant of the Cauchy-Vandermonde matrix.

    Rows are ``t^0, ..., t^(s-1), 1/(t - btilde_1), ..., 1/(t - btilde_n)``
    and columns the points ``T`` (``len(T) = s + n``)::

        det = (-1)^(s n) prod_{i<j} (t_j - t_i) prod_{i<j} (bt_i - bt_j)
              / prod_{i,j} (t_j - bt_i)
    """
    T = np.asarray(T, dtype=float)
    bt = np.asarray(btilde, dtype=float)
    m = T.size
    n = bt.size
    if n + s != m:
        raise ParameterError(f"need len(T) = s + len(btilde), got {m} != {s} + {n}")
    diff = T[None, :] - bt[:, None]
    if np.any(diff == 0):
        raise SingularityError("a point coincides with a pole")
    if np.unique(T).size != m or np.unique(bt).size != n:
        raise SingularityError("coincident nodes")
    num = 1.0
    for i in range(m):
        for j in range(i + 1, m):
            num *= T[j] - T[i]
    for i in range(n):
        for j in range(i + 1, n):
            num *= bt[i] - bt[j]
    return float((-1) ** (s * n) * num / np.prod(diff))
