import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chebdesign import (
    Basis,
    CollapseSpec,
    Design,
    ModelSpec,
    Verdict,
    convergence_check_designs,
    design_c,
    expansion_check,
    gamma_bar,
    gamma_tilde,
    h_const,
    limiting_design,
    limiting_system,
    verify_c,
)
from chebdesign.asympt import design_distance, inverse_polynomial_residuals
from chebdesign.errors import ParameterError, PreconditionError, RankError

DELTAS = (0.4, 0.2, 0.1, 0.05)
SPREAD = Design(np.array([0.0, 0.2, 0.5, 1.2, 3.0, 8.0]), np.full(6, 1 / 6))


def rational(s, r, x=-1.0, delta=0.1):
    return ModelSpec(Basis.RATIONAL, s, len(r), CollapseSpec(x, r, delta).b)


# ---------------------------------------------------------------------------
# gamma vectors


def test_gamma_k1():
    np.testing.assert_array_equal(gamma_tilde((0.0,)), [0.0, 1.0])
    np.testing.assert_array_equal(gamma_bar((0.0,)), [0.0, 0.0])


def test_gamma_k2():
    np.testing.assert_allclose(gamma_tilde((-1.0, 1.0)), [0.25, 0.25, -0.25, 0.25])
    np.testing.assert_allclose(gamma_bar((-1.0, 1.0)), [0.25, 0.0, -0.25, 0.0])


def test_gamma_leading_zeros():
    g = gamma_tilde((-1.0, 1.0), s=2)
    np.testing.assert_allclose(g, [0.0, 0.0, 0.25, 0.25, -0.25, 0.25])
    np.testing.assert_allclose(gamma_bar((-1.0, 1.0), s=2), [0.0, 0.0, 0.25, 0.0, -0.25, 0.0])


def test_gamma_symmetric_middle_vanishes():
    g = gamma_tilde((0.0, 1.0, 2.0))
    assert g[2] == 0.0
    assert g[3] == pytest.approx(1.0)


def test_gamma_rejects_coincident():
    with pytest.raises(ParameterError):
        gamma_tilde((1.0, 1.0))


rs = st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=4).filter(
    lambda r: len(r) == 1 or np.min(np.diff(np.sort(r))) > 0.1
)


@settings(max_examples=50, deadline=None)
@given(r=rs, lam=st.floats(0.2, 5.0), s=st.integers(0, 2))
def test_gamma_homogeneity(r, lam, s):
    r = np.sort(r)
    k = r.size
    g, gl = gamma_tilde(r, s), gamma_tilde(lam * r, s)
    np.testing.assert_allclose(gl[s + 1 :: 2], lam ** (-2 * (k - 1)) * g[s + 1 :: 2], rtol=1e-10)
    np.testing.assert_allclose(gl[s::2], lam ** (-2 * k + 1) * g[s::2], rtol=1e-10, atol=1e-300)


@settings(max_examples=50, deadline=None)
@given(r=rs, s=st.integers(0, 2))
def test_gamma_bar_is_odd_part(r, s):
    g, gb = gamma_tilde(r, s), gamma_bar(r, s)
    np.testing.assert_array_equal(gb[s::2], g[s::2])
    assert not np.any(gb[s + 1 :: 2]) and not np.any(gb[:s])


# ---------------------------------------------------------------------------
# limiting design and h


def test_limiting_design_values():
    d = limiting_design(rational(0, (-1.0, 1.0)), -1.0)
    np.testing.assert_allclose(d.weights, [0.13, 0.26, 0.27, 0.34], atol=0.01)
    np.testing.assert_allclose(d.support[:3], [0.0, 0.18, 1.08], atol=0.01)
    assert d.support[3] == pytest.approx(7.9, abs=0.05)


def test_limiting_design_scaling():
    model = rational(0, (-1.0, 1.0))
    d1 = limiting_design(model, -1.0)
    d2 = limiting_design(model, -2.0)
    np.testing.assert_allclose(d2.support, 2.0 * d1.support, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(d2.weights, d1.weights, atol=1e-8)


def test_limiting_design_is_em_optimal():
    model = rational(0, (-1.0, 1.0))
    system = limiting_system(model, -1.0)
    assert verify_c(system, limiting_design(model, -1.0), np.eye(4)[3]).verdict is Verdict.OPTIMAL


def test_limiting_design_k1_is_design_c():
    model = ModelSpec(Basis.RATIONAL, 0, 1, (-1.0,))
    d = limiting_design(model, -1.0)
    ref = design_c(model, [0.0, 1.0])
    np.testing.assert_allclose(d.support, ref.support, atol=1e-10)
    np.testing.assert_allclose(d.weights, ref.weights, atol=1e-10)


def test_h_k1():
    model = ModelSpec(Basis.RATIONAL, 0, 1, (-1.0,))
    d = Design([0.0, math.sqrt(2.0)], [0.5, 0.5])
    F = limiting_system(model, -1.0)(d.support)
    M = (F * d.weights) @ F.T
    assert h_const(model, d, -1.0) == pytest.approx(np.linalg.inv(M)[1, 1], rel=1e-12)


def test_h_k2_prefactor():
    model = rational(0, (-1.0, 1.0))
    F = limiting_system(model, -1.0)(SPREAD.support)
    M = (F * SPREAD.weights) @ F.T
    assert h_const(model, SPREAD, -1.0) == pytest.approx(36.0 * np.linalg.inv(M)[3, 3], rel=1e-9)


def test_h_singular():
    with pytest.raises(RankError):
        h_const(rational(0, (-1.0, 1.0)), Design([0.0, 1.0], [0.5, 0.5]), -1.0)


# ---------------------------------------------------------------------------
# expansion of the inverse information matrix


def _decreasing(errors, slack=0.1):
    return all(b <= (1 + slack) * a for a, b in zip(errors, errors[1:]))


@pytest.mark.parametrize("s,r", [(0, (0.0,)), (0, (-1.0, 1.0)), (0, (0.0, 1.0)), (1, (-1.0, 1.0)), (0, (-1.0, 0.5))])
def test_expansion_errors_decrease(s, r):
    model = rational(s, r)
    rows = expansion_check(model, -1.0, r, SPREAD, DELTAS)
    errors = [row.error for row in rows if not row.flagged]
    assert len(errors) >= 3
    assert _decreasing(errors)


@pytest.mark.parametrize("s,r", [(0, (0.0,)), (0, (-1.0, 1.0)), (0, (0.0, 1.0)), (0, (-1.0, 0.5))])
def test_expansion_extrapolation(s, r):
    # power-law extrapolation from the two largest deltas bounds the error at the smallest
    rows = expansion_check(rational(s, r), -1.0, r, SPREAD, DELTAS)
    (d0, e0), (d1, e1), (dn, en) = (rows[0].delta, rows[0].error), (rows[1].delta, rows[1].error), (rows[-1].delta, rows[-1].error)
    p = math.log(e0 / e1) / math.log(d0 / d1)
    predicted = e1 * (dn / d1) ** p
    assert en <= 10 * predicted


def test_expansion_wrong_exponent_detected():
    # with the exponent off by one the scaled matrices would not settle at all
    r = (-1.0, 1.0)
    model = rational(0, r)
    rows = expansion_check(model, -1.0, r, SPREAD, DELTAS)
    lead = np.max(np.abs(h_const(model, SPREAD, -1.0) * np.outer(gamma_bar(r), gamma_bar(r))))
    assert rows[-1].error < 0.5 * lead


def test_expansion_flags_singular_rows():
    r = (0.0, 1.0)
    rows = expansion_check(rational(0, r), -1.0, r, SPREAD, (0.1, 1e-4))
    assert not rows[0].flagged and rows[1].flagged and math.isnan(rows[1].error)


def test_expansion_needs_enough_points():
    r = (-1.0, 1.0)
    with pytest.raises(ParameterError):
        expansion_check(rational(0, r), -1.0, r, Design([0.0, 1.0], [0.5, 0.5]))


@pytest.mark.parametrize("r", [(0.0,), (-1.0, 1.0), (-1.0, 0.5, 2.0), (0.0, 1.0, 2.0)])
@pytest.mark.parametrize("delta", [0.3, 0.05])
def test_hermite_identities(r, delta):
    res = inverse_polynomial_residuals(r, delta)
    assert max(res.values()) <= 1e-8


# ---------------------------------------------------------------------------
# convergence of designs


def test_convergence_k2():
    r = (-1.0, 1.0)
    rows = convergence_check_designs(rational(0, r), -1.0, r, (0.5, 0.25, 0.1))
    for attr in ("dist_estar", "dist_c"):
        dist = [getattr(row, attr) for row in rows]
        assert all(b < a for a, b in zip(dist, dist[1:]))
    assert rows[-1].dist_estar < 0.05


@pytest.mark.parametrize("s,r", [(0, (0.0, 1.0)), (0, (-1.0, 0.5)), (1, (-1.0, 1.0))])
def test_convergence_shrinks(s, r):
    rows = convergence_check_designs(rational(s, r), -1.0, r, DELTAS)
    dist = [row.dist_estar for row in rows]
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_convergence_precondition():
    r = (0.0, 1.0, 2.0)
    with pytest.raises(PreconditionError):
        convergence_check_designs(rational(0, r, delta=0.05), -1.0, r, DELTAS, c=np.eye(6)[2])


def test_small_spread_near_limit():
    from chebdesign import design_estar

    d = design_estar(ModelSpec(Basis.RATIONAL, 0, 2, (-1.1, -0.9)))
    limit = limiting_design(rational(0, (-1.0, 1.0)), -1.0)
    assert design_distance(d, limit) < 0.05


def test_distance_cardinality():
    assert design_distance(Design([0.0], [1.0]), SPREAD) == math.inf


def test_collapse_spec_validation():
    with pytest.raises(ParameterError):
        CollapseSpec(-1.0, (1.0, 0.0), 0.1)
    with pytest.raises(ParameterError):
        CollapseSpec(-1.0, (0.0, 1.0), 0.0)
    model = rational(0, (-1.0, 1.0))
    assert CollapseSpec(-1.0, (-1.0, 1.0), 0.5).valid_for(model)
    assert not CollapseSpec(-1.0, (-1.0, 1.0), 2.0).valid_for(model)
