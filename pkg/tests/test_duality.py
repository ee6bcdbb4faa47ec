import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strongtype import duality as du, martingale as mg, spaces as sp
from strongtype.dyadic import StepFunction


def test_extract_example():
    g = StepFunction(np.array([1.0, 3.0, 5.0, 7.0]), sp.lp(2, 1))
    e = du.extract_dual_differences(g, 2)
    assert e.initial.tolist() == [4.0]
    assert e.levels[0].tolist() == [[-2.0]]
    assert e.levels[1].tolist() == [[-1.0], [-1.0]]


def test_extract_constant_and_rademacher():
    S = sp.euclidean(2)
    e = du.extract_dual_differences(StepFunction(np.tile([1.0, -2.0], (8, 1)), S), 3)
    assert e.initial.tolist() == [1.0, -2.0] and all(np.all(l == 0) for l in e.levels)
    x = np.array([0.5, 1.5])
    e = du.extract_dual_differences(StepFunction(np.vstack([x, -x]), S), 1)
    assert np.all(e.initial == 0) and e.levels[0].tolist() == [x.tolist()]
    with pytest.raises(ValueError):
        du.extract_dual_differences(StepFunction(np.zeros((4, 2)), S), 1)


def test_extract_round_trip():
    rng = np.random.default_rng(0)
    S = sp.euclidean(3)
    for n in range(4):
        g = StepFunction(rng.normal(size=(2**n, 3)), S)
        e = du.extract_dual_differences(g, n)
        back = mg.to_step(e, n, S, partial=True)
        assert np.allclose(back.values, g.values, atol=1e-13)


def test_pairing_split():
    rng = np.random.default_rng(1)
    S = sp.euclidean(2)
    for seed in range(50):
        seq = mg.random_sequence(seed, 1 + seed % 4, 2)
        g = StepFunction(rng.normal(size=(2 ** (seed % 5), 2)), S)
        rep = du.pairing_split_check(rng.normal(size=2), seq, g)
        assert rep.value <= 1e-12 * max(1.0, abs(rep.lhs))
    with pytest.raises(mg.MartingaleError):
        du.pairing_split_check(np.ones(2), mg.random_sequence(0, 2, 2, with_initial=True),
                               StepFunction(np.zeros((2, 2)), S))


def test_lambda_example():
    rep = du.lambda_balance_check(1.0, np.sqrt(2), 1.0, 2.0)
    assert rep.config["lambda"] == pytest.approx(1.0, rel=1e-15)
    assert rep.lhs == pytest.approx(2.0, rel=1e-15) and rep.rhs == pytest.approx(2.0, rel=1e-15)


def test_lambda_rejects_bad_input():
    for args in ((1.0, 1.0, 1.0, 1.5), (0.0, 1.0, 1.0, 1.5), (1.0, 2.0, 0.0, 1.5), (1.0, 2.0, 1.0, 2.5)):
        with pytest.raises(ValueError):
            du.lambda_balance_check(*args)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), st.floats(1.01, 20), st.floats(0.1, 10), st.floats(1.05, 2.0))
def test_lambda_balances(a, ratio, c, p):
    rep = du.lambda_balance_check(a, a * ratio, c, p)
    assert rep.value <= 1e-9 * rep.lhs


def test_lambda_homogeneous_of_degree_zero():
    l1 = du.balance_lambda(0.7, 1.3, 1.1, 1.5)
    l2 = du.balance_lambda(7.0, 13.0, 1.1, 1.5)
    assert l2 == pytest.approx(l1, rel=1e-12)


def test_dual_root_only_balances_at_p_two():
    a, t, c = 1.0, 1.7, 1.2
    for p, balanced in ((2.0, True), (1.5, False), (1.25, False)):
        pd = sp.dual_index(p)
        lam = c * a ** (pd - 1) / (t**pd - a**pd) ** (1 / pd)
        lhs = t * (c**p + lam**p) ** (1 / p)
        rhs = c * (t**pd - a**pd) ** (1 / pd) + lam * a
        assert (abs(lhs - rhs) <= 1e-12 * lhs) is balanced


@pytest.mark.parametrize("T,p", [
    (sp.identity(sp.euclidean(3)), 2.0),
    (sp.identity(sp.lp(1.5, 2)), 1.5),
    (sp.LinearOperator(np.diag([2.0, 1.0]), sp.lp(1.5, 2), sp.lp(1.5, 2)), 1.5),
])
def test_duality_experiment(T, p):
    rep = du.duality_experiment(T, p, budget=4000)
    assert rep.relative_gap <= 0.05
    d = rep.to_dict()
    assert d["p_dual"] == pytest.approx(sp.dual_index(p))


def test_duality_missing_dual():
    rng = np.random.default_rng(2)
    poly = sp.polyhedral(rng.normal(size=(40, 6)))
    with pytest.raises(sp.DualNotImplemented):
        du.duality_experiment(sp.identity(poly), 1.5, budget=100)
    with pytest.raises(ValueError):
        du.duality_experiment(sp.identity(sp.euclidean(2)), 2.5, budget=100)
    with pytest.raises(du.DualityError):
        du.duality_experiment(sp.identity(sp.euclidean(2)), 1.0, budget=100)
