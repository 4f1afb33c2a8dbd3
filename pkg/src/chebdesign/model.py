"""Regression model class, its linearization and its limiting system.

The nonlinear model is

    Y = sum_i a_i h_i(t) + sum_i a_{s+i} phi(t, b_i) + eps,

and locally optimal designs for it are designs for the linear model with
regression vector

    f(t, b) = (h_1(t), ..., h_s(t), phi(t, b_1), phi'(t, b_1), ...,
               phi(t, b_k), phi'(t, b_k)),

where phi' is the derivative in the second argument.  When all b_i collapse
to a single value x the limiting regression vector is

    fbar(t, x) = (h_1(t), ..., h_s(t), phi(t, x), phi'(t, x), ...,
                  phi^(2k-1)(t, x)).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, ParameterError, SingularityError

__all__ = [
    "Basis",
    "Interval",
    "ModelSpec",
    "FunctionSystem",
    "phi_derivative",
    "phi_derivative_dt",
    "eval_f",
    "eval_fbar",
    "ka_matrix",
    "linearized_system",
    "limiting_system",
    "polynomial_system",
]

INF = math.inf


class Basis(str, enum.Enum):
    RATIONAL = "rational"
    EXPONENTIAL = "exponential"
    LOGARITHMIC = "logarithmic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Interval:
    """Design interval ``[lower, upper]``; ``upper`` may be ``math.inf``.

    ``math.inf`` is the only accepted representation of an unbounded right
    end.  Unbounded intervals are compactified by ``u = (t - lower) / (1 + t -
    lower)`` onto ``[0, 1)``; bounded ones by the affine map onto ``[0, 1]``.
    """

    lower: float
    upper: float = INF

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not math.isfinite(lo):
            raise ParameterError("interval lower end must be finite")
        if math.isnan(hi) or hi == -INF or hi <= lo:
            raise ParameterError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.upper)

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.lower) & (t <= self.upper)

    def to_unit(self, t):
        t = np.asarray(t, dtype=float)
        if self.bounded:
            return (t - self.lower) / (self.upper - self.lower)
        d = t - self.lower
        return d / (1.0 + d)

    def from_unit(self, u):
        u = np.asarray(u, dtype=float)
        if self.bounded:
            return self.lower + u * (self.upper - self.lower)
        return self.lower + u / (1.0 - u)

    def grid(self, n: int) -> np.ndarray:
        """``n`` points, uniform in compactified coordinates, ascending.

        For unbounded intervals the point at infinity is left out.
        """
        if self.bounded:
            u = np.linspace(0.0, 1.0, n)
        else:
            u = np.arange(n) / n
        return self.from_unit(u)

    def to_json(self):
        return [self.lower, "inf" if not self.bounded else self.upper]


PhiFn = Callable[[np.ndarray, float, int], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """The regression model.

    ``phi`` (and optionally ``phi_dt``) must be given for ``Basis.CUSTOM``:
    ``phi(t, x, j)`` returns the j-th derivative of phi in its second
    argument, vectorized over ``t``; ``phi_dt(t, x, j)`` its derivative in t.
    """

    basis: Basis
    s: int
    k: int
    b: tuple
    interval: Interval = Interval(0.0, INF)
    a: Optional[tuple] = None
    phi: Optional[PhiFn] = dataclasses.field(default=None, compare=False)
    phi_dt: Optional[PhiFn] = dataclasses.field(default=None, compare=False)

    def __post_init__(self):
        basis = Basis(self.basis)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if self.a is not None:
            object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        if not isinstance(self.interval, Interval):
            object.__setattr__(self, "interval", Interval(*self.interval))

        if self.s < 0 or self.k < 0:
            raise ParameterError("s and k must be non-negative")
        if self.m < 1:
            raise ParameterError("m = s + 2k must be at least 1")
        if len(self.b) != self.k:
            raise ParameterError(f"expected {self.k} nonlinear parameters b, got {len(self.b)}")
        if len(set(self.b)) != len(self.b):
            raise ParameterError("nonlinear parameters b must be pairwise distinct")
        for x in self.b:
            check_parameter(basis, x, self.interval)
        if self.a is not None:
            if len(self.a) != self.k:
                raise ParameterError(f"expected {self.k} linear parameters a, got {len(self.a)}")
            if any(v == 0.0 for v in self.a):
                raise ParameterError("linear parameters a must be nonzero")
        if basis is Basis.CUSTOM and self.phi is None:
            raise ParameterError("custom basis requires phi(t, x, j)")
        if basis is Basis.EXPONENTIAL and not self.interval.bounded and any(x >= 0 for x in self.b):
            raise ParameterError("exponential basis on an unbounded interval needs b < 0")
        if basis is Basis.LOGARITHMIC and not self.interval.bounded and self.k > 0:
            # log(t - b) is unbounded, so no sup-norm Chebyshev polynomial exists
            raise ParameterError("logarithmic basis needs a bounded interval")

    @property
    def m(self) -> int:
        return self.s + 2 * self.k

    def with_b(self, b: Sequence[float]) -> "ModelSpec":
        return dataclasses.replace(self, b=tuple(b), k=len(b), a=None)


def check_parameter(basis: Basis, x: float, interval: Interval) -> None:
    """Raise ``ParameterError`` if ``x`` is not admissible for ``basis``."""
    if not math.isfinite(x):
        raise ParameterError("nonlinear parameters must be finite")
    if basis is Basis.RATIONAL and interval.lower <= x <= interval.upper:
        raise ParameterError(f"rational basis: b = {x} lies inside the design interval")
    if basis is Basis.LOGARITHMIC and x >= interval.lower:
        raise ParameterError(f"logarithmic basis: b = {x} must lie left of the design interval")


# ---------------------------------------------------------------------------
# phi and its derivatives


def phi_derivative(basis: Basis, t, x: float, j: int, phi: PhiFn | None = None) -> np.ndarray:
    """j-th derivative of phi(t, x) with respect to x."""
    t = np.asarray(t, dtype=float)
    if basis is Basis.RATIONAL:
        d = t - x
        if np.any(d == 0):
            raise SingularityError(f"rational basis evaluated at its pole t = {x}")
        return math.factorial(j) * d ** (-(j + 1))
    if basis is Basis.EXPONENTIAL:
        return t**j * np.exp(t * x)
    if basis is Basis.LOGARITHMIC:
        d = t - x
        if np.any(d <= 0):
            raise SingularityError(f"logarithmic basis needs t > {x}")
        if j == 0:
            return np.log(d)
        return -math.factorial(j - 1) * d ** (-j)
    return np.asarray(phi(t, x, j), dtype=float)


def phi_derivative_dt(basis: Basis, t, x: float, j: int, phi_dt: PhiFn | None = None):
    """Derivative in t of ``phi_derivative(basis, t, x, j)``; None if unknown."""
    t = np.asarray(t, dtype=float)
    if basis is Basis.RATIONAL:
        return -math.factorial(j + 1) * (t - x) ** (-(j + 2))
    if basis is Basis.EXPONENTIAL:
        e = np.exp(t * x)
        lead = j * t ** (j - 1) * e if j > 0 else 0.0
        return lead + x * t**j * e
    if basis is Basis.LOGARITHMIC:
        return math.factorial(j) * (t - x) ** (-(j + 1))
    if phi_dt is None:
        return None
    return np.asarray(phi_dt(t, x, j), dtype=float)


def _check_points(model: ModelSpec, t: np.ndarray) -> None:
    if not np.all(model.interval.contains(t)):
        bad = t[~model.interval.contains(t)]
        raise DomainError(f"t = {bad[0]} outside interval [{model.interval.lower}, {model.interval.upper}]")
    if model.basis in (Basis.RATIONAL, Basis.LOGARITHMIC):
        for x in model.b:
            if np.any(t == x):
                raise SingularityError(f"t coincides with nonlinear parameter {x}")


def _rows(model: ModelSpec, t: np.ndarray, columns) -> np.ndarray:
    out = np.empty((model.s + len(columns), t.size))
    for i in range(model.s):
        out[i] = t**i
    for r, (x, j) in enumerate(columns):
        out[model.s + r] = phi_derivative(model.basis, t, x, j, model.phi)
    return out


def _rows_dt(model: ModelSpec, t: np.ndarray, columns):
    out = np.empty((model.s + len(columns), t.size))
    for i in range(model.s):
        out[i] = i * t ** (i - 1) if i > 0 else 0.0
    for r, (x, j) in enumerate(columns):
        d = phi_derivative_dt(model.basis, t, x, j, model.phi_dt)
        if d is None:
            return None
        out[model.s + r] = d
    return out


def _linearized_columns(model: ModelSpec):
    return [(x, j) for x in model.b for j in (0, 1)]


def _limiting_columns(model: ModelSpec, x: float):
    return [(x, j) for j in range(2 * model.k)]


def _shape(values: np.ndarray, scalar: bool) -> np.ndarray:
    return values[:, 0] if scalar else values


def eval_f(model: ModelSpec, t):
    """Linearized regression vector f(t, b); shape (m,) or (m, n)."""
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    _check_points(model, ta)
    return _shape(_rows(model, ta, _linearized_columns(model)), np.ndim(t) == 0)


def eval_fbar(model: ModelSpec, t, x: float):
    """Limiting regression vector fbar(t, x); shape (m,) or (m, n)."""
    check_parameter(model.basis, x, model.interval)
    ta = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(model.interval.contains(ta)):
        raise DomainError("t outside the design interval")
    return _shape(_rows(model, ta, _limiting_columns(model, x)), np.ndim(t) == 0)


def ka_matrix(model: ModelSpec) -> np.ndarray:
    """Parameter scaling K_a = diag(1,...,1, 1, 1/a_1, ..., 1, 1/a_k).

    The information matrix of the nonlinear model is K_a^{-1} M K_a^{-1}.
    """
    if model.a is None:
        raise ParameterError("K_a needs the linear parameters a")
    if any(v == 0.0 for v in model.a):
        raise ParameterError("linear parameters a must be nonzero")
    diag = [1.0] * model.s
    for a in model.a:
        diag += [1.0, 1.0 / a]
    return np.diag(diag)


# ---------------------------------------------------------------------------
# Function systems


@dataclass(frozen=True)
class FunctionSystem:
    """m real functions on an interval, evaluated together.

    ``values(t)`` maps a 1-d array of n points to an (m, n) array;
    ``derivative(t)``, when given, returns the t-derivatives in the same
    layout.  Without it derivatives fall back to central differences.
    """

    values: Callable[[np.ndarray], np.ndarray]
    m: int
    interval: Interval
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __call__(self, t) -> np.ndarray:
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        return _shape(np.asarray(self.values(ta), dtype=float).reshape(self.m, ta.size), np.ndim(t) == 0)

    def dt(self, t) -> np.ndarray:
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        if self.derivative is not None:
            out = np.asarray(self.derivative(ta), dtype=float).reshape(self.m, ta.size)
        else:
            h = 1e-5 * np.maximum(1.0, np.abs(ta))
            fwd = ta - h < self.interval.lower
            bwd = ta + h > self.interval.upper
            lo = np.where(fwd, ta, ta - h)
            hi = np.where(bwd, ta, ta + h)
            out = (self.values(hi) - self.values(lo)) / (hi - lo)
        return _shape(out, np.ndim(t) == 0)


def _system(model: ModelSpec, columns, name: str) -> FunctionSystem:
    deriv = None
    if model.basis is not Basis.CUSTOM or model.phi_dt is not None:
        deriv = lambda t: _rows_dt(model, t, columns)  # noqa: E731
    return FunctionSystem(
        values=lambda t: _rows(model, t, columns),
        m=model.s + len(columns),
        interval=model.interval,
        derivative=deriv,
        name=name,
    )


def linearized_system(model: ModelSpec) -> FunctionSystem:
    return _system(model, _linearized_columns(model), f"f({model.basis.value}, b={model.b})")


def limiting_system(model: ModelSpec, x: float) -> FunctionSystem:
    check_parameter(model.basis, x, model.interval)
    return _system(model, _limiting_columns(model, x), f"fbar({model.basis.value}, x={x})")


def polynomial_system(m: int, interval: Interval | Sequence[float] = (-1.0, 1.0)) -> FunctionSystem:
    """Monomials 1, t, ..., t^(m-1)."""
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    powers = np.arange(m)[:, None]
    return FunctionSystem(
        values=lambda t: t[None, :] ** powers,
        m=m,
        interval=interval,
        derivative=lambda t: np.where(powers > 0, powers * t[None, :] ** np.maximum(powers - 1, 0), 0.0),
        name=f"poly({m})",
    )
