import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chebdesign import (
    Basis,
    Design,
    Interval,
    ModelSpec,
    Verdict,
    brute_force_c,
    brute_force_E,
    c_variance,
    design_c,
    design_estar,
    efficiency,
    eig_ratio_sweep,
    info_matrix,
    polynomial_system,
    sym_eigen,
    verify_c,
    verify_E,
)
from chebdesign.design import chebyshev_solution
from chebdesign.errors import EstimabilityError, ParameterError

SQ2 = math.sqrt(2.0)


def k1(b=-1.0):
    return ModelSpec(Basis.RATIONAL, 0, 1, (b,))


def k2(b1, b2, **kw):
    return ModelSpec(Basis.RATIONAL, 0, 2, (b1, b2), **kw)


# ---------------------------------------------------------------------------
# eigenanalysis


def test_eigen_identity():
    vals, _ = sym_eigen(np.eye(3))
    np.testing.assert_allclose(vals, [1.0, 1.0, 1.0])


def test_eigen_diagonal():
    vals, vecs = sym_eigen(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(vals, [1.0, 2.0])
    np.testing.assert_allclose(np.abs(vecs), [[0.0, 1.0], [1.0, 0.0]])


def test_eigen_rank_one():
    vals, _ = sym_eigen(np.array([[1.0, 1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(vals, [0.0, 2.0], atol=1e-15)


def test_eigen_rejects_asymmetric():
    with pytest.raises(ParameterError):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_eigen_decomposition(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    M = A + A.T
    vals, vecs = sym_eigen(M)
    assert np.all(np.diff(vals) >= 0)
    norm = np.linalg.norm(M, 2)
    for i in range(n):
        assert np.linalg.norm(M @ vecs[:, i] - vals[i] * vecs[:, i]) <= 1e-10 * max(norm, 1.0)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)


# ---------------------------------------------------------------------------
# E-optimality


def test_verify_E_linear():
    rep = verify_E(polynomial_system(2), Design([-1.0, 1.0], [0.5, 0.5]))
    assert rep.lambda_min == pytest.approx(1.0)
    assert rep.multiplicity == 2


def test_verify_E_linear_is_optimal():
    # eigenvalue 1 is double, but the uniform mixture of the eigenvectors certifies
    rep = verify_E(polynomial_system(2), Design([-1.0, 1.0], [0.5, 0.5]))
    assert rep.verdict is Verdict.OPTIMAL


def test_verify_E_k1():
    model = k1()
    rep = verify_E(model, design_estar(model))
    assert rep.verdict is Verdict.OPTIMAL
    assert rep.multiplicity == 1


def test_verify_E_rejects_bad_design():
    model = k2(-1.5, -0.5)
    d = design_estar(model)
    bad = Design(d.support, np.full(4, 0.25))
    assert verify_E(model, bad).verdict is Verdict.NOT_OPTIMAL


def test_verify_E_rejects_wrong_support():
    model = k1()
    assert verify_E(model, Design([0.0, 3.0], [0.3, 0.7])).verdict is Verdict.NOT_OPTIMAL


def test_eigenvalue_ratio_above_one():
    model = k2(-1.0, -0.5)
    rep = verify_E(model, design_estar(model))
    assert rep.ratio > 1.0
    assert rep.verdict is Verdict.OPTIMAL


def test_cstar_is_eigenvector():
    model = k2(-1.5, -0.5)
    sol = chebyshev_solution(model)
    M = info_matrix(model, design_estar(model, sol))
    c = sol.coeffs
    np.testing.assert_allclose(M @ c, c / (c @ c), atol=1e-8 * np.max(np.abs(c)) / (c @ c))


def test_report_serializes():
    model = k1()
    d = verify_E(model, design_estar(model)).to_dict()
    assert d["verdict"] == "optimal" and d["criterion"] == "E"


# ---------------------------------------------------------------------------
# c-optimality


def test_verify_c_e2():
    d = Design([0.0, SQ2], [1 - 1 / SQ2, 1 / SQ2])
    assert verify_c(k1(), d, [0.0, 1.0]).verdict is Verdict.OPTIMAL


def test_verify_c_onepoint_vs_candidate():
    model = k1()
    c = [1.0, 0.7]
    assert verify_c(model, Design([3.0 / 7.0], [1.0]), c).verdict is Verdict.OPTIMAL
    assert verify_c(model, design_c(model, c), c).verdict is Verdict.NOT_OPTIMAL


def test_verify_c_not_estimable():
    with pytest.raises(EstimabilityError):
        verify_c(k1(), Design([1.0], [1.0]), [1.0, 0.0])


def test_verify_c_agrees_with_E_at_cstar():
    for model in (k1(), k2(-1.5, -0.5), k2(-1.1, -0.9)):
        sol = chebyshev_solution(model)
        d = design_c(model, sol.coeffs)
        assert verify_c(model, d, sol.coeffs).verdict == verify_E(model, design_estar(model)).verdict


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), scale=st.floats(0.01, 100.0), flip=st.integers(0, 15))
def test_c_invariances(seed, scale, flip):
    model = k2(-1.5, -0.5)
    c = np.random.default_rng(seed).normal(size=4)
    d = design_c(model, c)
    rep = verify_c(model, d, c)
    assert verify_c(model, d, scale * c).verdict is rep.verdict
    # a diagonal sign flip of the regression functions maps c to S c
    S = np.array([(-1.0) ** ((flip >> i) & 1) for i in range(4)])
    flipped = ModelSpec(
        Basis.CUSTOM,
        0,
        2,
        (-1.5, -0.5),
        phi=lambda t, x, j: S[2 * (0 if x == -1.5 else 1) + j] * math.factorial(j) * (t - x) ** (-(j + 1)),
    )
    assert c_variance(flipped, d, S * c) == pytest.approx(c_variance(model, d, c), rel=1e-10)


# ---------------------------------------------------------------------------
# efficiencies


def test_efficiency_self():
    model = k2(-1.5, -0.5)
    e = np.eye(4)
    for i in range(4):
        ref = design_c(model, e[i])
        assert efficiency(model, ref, i + 1, ref) == pytest.approx(1.0)


def test_efficiency_k1_endpoints():
    model = k1()
    d = design_estar(model)
    assert efficiency(model, d, 1) == pytest.approx(0.9595, abs=5e-4)
    assert efficiency(model, d, 2) == pytest.approx(0.9805, abs=5e-4)


def test_efficiency_bounded_by_one():
    model = k2(-1.5, -0.5)
    d = Design([0.0, 0.5, 2.0, 6.0], [0.25] * 4)
    for i in range(1, 5):
        assert 0.0 < efficiency(model, d, i) <= 1.0 + 1e-9


def test_efficiencies_two_term():
    # reference row labelled z = 0.5, which corresponds to z = 0.6
    model = k2(-1.6, -0.4)
    d = design_estar(model)
    effs = [efficiency(model, d, i) for i in range(1, 5)]
    np.testing.assert_allclose(effs, [0.70, 0.99, 0.95, 0.87], atol=0.01)


def test_efficiency_coordinate_range():
    with pytest.raises(ParameterError):
        efficiency(k1(), design_estar(k1()), 3)


# ---------------------------------------------------------------------------
# brute-force oracles


def test_brute_force_linear():
    d = brute_force_E(polynomial_system(2))
    np.testing.assert_allclose(d.support, [-1.0, 1.0], atol=1e-6)
    np.testing.assert_allclose(d.weights, [0.5, 0.5], atol=1e-6)
    assert np.linalg.eigvalsh(info_matrix(polynomial_system(2), d))[0] == pytest.approx(1.0, abs=1e-6)


def test_brute_force_k1():
    model = k1()
    d = brute_force_E(model)
    e = design_estar(model)
    np.testing.assert_allclose(d.support, e.support, atol=1e-3)
    np.testing.assert_allclose(d.weights, e.weights, atol=1e-3)


def test_brute_force_k2():
    model = k2(-1.5, -0.5)
    lam = np.linalg.eigvalsh(info_matrix(model, brute_force_E(model)))[0]
    ref = np.linalg.eigvalsh(info_matrix(model, design_estar(model)))[0]
    assert abs(lam / ref - 1.0) < 1e-3


def test_brute_force_deterministic():
    model = k2(-1.5, -0.5, interval=Interval(0.0, 5.0))
    a, b = brute_force_E(model, grid_size=200), brute_force_E(model, grid_size=200)
    assert np.array_equal(a.support, b.support) and np.array_equal(a.weights, b.weights)


def test_brute_force_c_onepoint():
    d = brute_force_c(k1(), [1.0, 0.7])
    assert len(d) == 1
    assert d.support[0] == pytest.approx(3.0 / 7.0, abs=1e-4)


def test_brute_force_c_matches_candidate():
    model = k1()
    d = brute_force_c(model, [0.0, 1.0])
    assert c_variance(model, d, [0.0, 1.0]) == pytest.approx(c_variance(model, design_c(model, [0.0, 1.0]), [0.0, 1.0]), rel=1e-6)


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_flags_invalid_row():
    rows = eig_ratio_sweep(k2(-1.0, -0.5), [(-1.0, -0.5), (-1.0, -1.0), (-1.0, -0.3)])
    assert [r.ok for r in rows] == [True, False, True]
    assert math.isnan(rows[1].ratio)


def test_sweep_single_row_matches_verify():
    model = k2(-1.0, -0.5)
    (row,) = eig_ratio_sweep(model, [(-1.0, -0.5)])
    assert row.ratio == pytest.approx(verify_E(model, design_estar(model)).ratio, rel=1e-12)
