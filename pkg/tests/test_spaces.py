import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from strongtype import spaces as sp
from strongtype.spaces import DualNotImplemented, Norm, NormError


def test_norm_eval_examples():
    assert sp.norm_eval(sp.lp(1.5, 2), [1, 1]) == pytest.approx(1.5874010519681994, abs=1e-15)
    for N in (sp.lp(1.5, 3), sp.euclidean(3), sp.sup(3), sp.polyhedral(np.eye(3))):
        assert N(np.zeros(3)) == 0
    assert sp.sup(2)([3, -4]) == 4


def test_norm_errors():
    with pytest.raises(NormError):
        sp.lp(2, 2)([1, 2, 3])
    with pytest.raises(NormError):
        sp.lp(2, 2, weights=[1, 0])
    with pytest.raises(NormError):
        sp.lp(0.5, 2)


def test_dual_norm_examples():
    x = np.array([3.0, -4.0])
    assert sp.dual_norm_eval(sp.euclidean(2), x) == pytest.approx(5.0)
    assert sp.dual_norm_eval(sp.lp(1, 2), x) == 4.0
    assert sp.dual_norm_eval(sp.lp(3, 2), [1, 1]) == pytest.approx(1.5874010519681994, abs=1e-15)


def test_dual_of_inf_is_l1_and_weights():
    N = sp.lp(3, 2, weights=[2.0, 0.5])
    D = N.dual()
    assert D.kind == "lp" and D.p == pytest.approx(1.5)
    np.testing.assert_allclose(D.weights, np.array([2.0, 0.5]) ** (-1.5 / 3))
    assert sp.sup(2, [2.0, 4.0]).dual() == sp.lp(1, 2, [0.5, 0.25])


def random_norm(kind, seed):
    rng = np.random.default_rng(seed)
    if kind == "lp":
        return sp.lp(float(rng.uniform(1, 5)), 3, rng.uniform(0.3, 3, 3))
    if kind == "lp1":
        return sp.lp(1, 3, rng.uniform(0.3, 3, 3))
    if kind == "sup":
        return sp.sup(3, rng.uniform(0.3, 3, 3))
    if kind == "euclidean":
        return sp.euclidean(3)
    return sp.polyhedral(np.vstack([np.eye(3), rng.normal(size=(3, 3))]))


KINDS = ["lp", "lp1", "sup", "euclidean", "polyhedral"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 10**6))
def test_bidual_and_holder(kind, seed):
    N = random_norm(kind, seed)
    rng = np.random.default_rng(seed + 1)
    X = rng.normal(size=(50, 3))
    Xd = rng.normal(size=(50, 3))
    np.testing.assert_allclose(N.dual().dual()(X), N(X), rtol=1e-9)
    assert np.all(np.sum(X * Xd, axis=1) <= N(X) * N.dual()(Xd) + 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 10**6), st.floats(0.01, 100))
def test_triangle_and_homogeneity(kind, seed, lam):
    N = random_norm(kind, seed)
    rng = np.random.default_rng(seed + 2)
    X, Y = rng.normal(size=(50, 3)), rng.normal(size=(50, 3))
    assert np.all(N(X + Y) <= N(X) + N(Y) + 1e-12)
    np.testing.assert_allclose(N(lam * X), lam * N(X), rtol=1e-12)
    np.testing.assert_allclose(N(-X), N(X), rtol=0)
    assert np.all(N(X) > 0)


def test_polyhedral_dual_against_linprog():
    rng = np.random.default_rng(3)
    F = np.vstack([np.eye(3), rng.normal(size=(4, 3))])
    N = sp.polyhedral(F)
    D = N.dual()
    # dual norm of y = max <x, y> subject to |<f_j, x>| <= 1
    A = np.vstack([F, -F])
    for y in rng.normal(size=(20, 3)):
        res = linprog(-y, A_ub=A, b_ub=np.ones(A.shape[0]), bounds=[(None, None)] * 3)
        assert D(y) == pytest.approx(-res.fun, rel=1e-9)


def test_polyhedral_dual_too_large():
    F = np.random.default_rng(0).normal(size=(40, 6))
    with pytest.raises(DualNotImplemented):
        sp.polyhedral(F).dual()


def test_serialization_round_trip():
    for N in (sp.lp(1.5, 2, [1, 2]), sp.euclidean(3), sp.sup(2), sp.polyhedral(np.eye(2))):
        assert Norm.from_dict(N.to_dict()) == N
    assert Norm.from_dict({"kind": "lp", "p": "inf", "dim": 2}) == sp.sup(2)
    assert Norm.from_dict({"kind": "polyhedral", "functionals": [[1, 0], [0, 1]]}).dim == 2
    with pytest.raises(NormError):
        Norm.from_dict({"kind": "lp", "p": 2})


def test_adjoint_examples():
    ident = sp.identity(sp.lp(1.5, 3))
    A = sp.adjoint(ident)
    assert A.domain == sp.lp(3, 3) and A.codomain == sp.lp(3, 3) and A.is_identity
    rng = np.random.default_rng(4)
    T = sp.LinearOperator(rng.normal(size=(2, 3)), sp.lp(1.5, 3), sp.sup(2))
    np.testing.assert_array_equal(sp.adjoint(sp.adjoint(T)).matrix, T.matrix)
    Td = sp.adjoint(T)
    for _ in range(20):
        x, yd = rng.normal(size=3), rng.normal(size=2)
        assert T(x) @ yd == pytest.approx(x @ Td(yd), abs=1e-12)


def test_operator_dimension_checks():
    with pytest.raises(NormError):
        sp.LinearOperator(np.eye(2), sp.lp(2, 3), sp.lp(2, 2))
    with pytest.raises(NormError):
        sp.LinearOperator.from_dict({"domain": {"kind": "lp", "p": 2, "dim": 2},
                                     "codomain": {"kind": "lp", "p": 2, "dim": 3}})


def test_operator_norm_examples():
    assert sp.operator_norm(sp.identity(sp.lp(1.5, 3))).lower_bound == pytest.approx(1, abs=1e-6)
    zero = sp.LinearOperator(np.zeros((2, 2)), sp.euclidean(2), sp.euclidean(2))
    assert sp.operator_norm(zero).lower_bound == 0
    D = sp.LinearOperator(np.diag([2.0, 1.0]), sp.euclidean(2), sp.euclidean(2))
    est = sp.operator_norm(D)
    assert est.lower_bound == pytest.approx(2, abs=1e-6)
    x = np.array(est.witness["x"])
    assert D.codomain(D(x)) / D.domain(x) == pytest.approx(est.lower_bound, rel=1e-12)


def test_operator_norm_workers_do_not_matter():
    T = sp.LinearOperator(np.array([[1.0, 2.0], [0.5, -1.0]]), sp.lp(1.5, 2), sp.lp(3, 2))
    a = sp.operator_norm(T, budget=3000, seed=5, workers=1)
    b = sp.operator_norm(T, budget=3000, seed=5, workers=4)
    assert a.to_dict() == b.to_dict()
