import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strongtype import dyadic, spaces as sp
from strongtype.dyadic import DyadicError, DyadicInterval, StepFunction

S1 = sp.lp(2, 1)


def step(values, space=S1):
    return StepFunction(np.asarray(values, dtype=float), space)


def test_interval_geometry():
    d = DyadicInterval(3, 5)
    assert (d.left, d.right, d.length) == (5 / 8, 6 / 8, 1 / 8)
    assert d.children() == (DyadicInterval(4, 10), DyadicInterval(4, 11))
    assert d.parent() == DyadicInterval(2, 2)
    assert d.contains(0.7) and not d.contains(0.75)


def test_interval_rejects_bad_index():
    with pytest.raises(DyadicError):
        DyadicInterval(2, 4)
    with pytest.raises(DyadicError):
        DyadicInterval(0, 0).parent()


def test_step_function_validation():
    with pytest.raises(DyadicError):
        step([1, 2, 3])
    with pytest.raises(DyadicError):
        StepFunction(np.zeros((2, 3)), sp.lp(2, 2))
    with pytest.raises(DyadicError):
        step(np.zeros(2 ** (dyadic.DEPTH_CAP + 1)))


def test_evaluation_at_points():
    f = step([1, 3, 5, 7])
    assert f(0.0)[0] == 1 and f(0.3)[0] == 3 and f(0.99)[0] == 7
    with pytest.raises(DyadicError):
        f(1.0)


def test_lp_norm_constant():
    x = np.array([1.0, -2.0])
    f = StepFunction.constant(x, sp.lp(1.5, 2), depth=3)
    for p in (1, 1.5, 2, 3):
        assert dyadic.lp_norm(f, p) == pytest.approx(sp.lp(1.5, 2)(x), rel=1e-15)


def test_lp_norm_symmetric_halves():
    for p in (1, 1.7, 2, 4):
        assert dyadic.lp_norm(step([2.5, -2.5]), p) == pytest.approx(2.5, rel=1e-15)


def test_lp_norm_frozen_value():
    # ((1 + 9) / 2) ** 0.5
    assert dyadic.lp_norm(step([1, 3]), 2) == pytest.approx(2.2360679774997896, abs=1e-15)


def test_lp_norm_rejects_bad_exponents():
    with pytest.raises(DyadicError):
        dyadic.lp_norm(step([1, 3]), 0.5)
    with pytest.raises(DyadicError):
        dyadic.lp_norm(step([1, 3]), np.inf)


def test_pairing_examples():
    x, xd = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    E = sp.euclidean(2)
    assert dyadic.pairing(StepFunction.constant(x, E), StepFunction.constant(xd, E)) == pytest.approx(1.0)
    r1 = StepFunction(np.vstack([x, -x]), E)
    assert dyadic.pairing(r1, StepFunction.constant(xd, E)) == 0.0
    assert dyadic.pairing(step([1, 3]), step([2, -1])) == -0.5


def test_pairing_dimension_mismatch():
    with pytest.raises(DyadicError):
        dyadic.pairing(step([1, 3]), StepFunction(np.zeros((2, 2)), sp.lp(2, 2)))


def test_cond_expect_examples():
    f = step([1, 3, 5, 7])
    assert dyadic.cond_expect(f, 2) is f
    np.testing.assert_array_equal(dyadic.cond_expect(f, 1).values[:, 0], [2, 6])
    np.testing.assert_array_equal(dyadic.cond_expect(f, 0).values[:, 0], [4])
    centered = step([1, -1, 2, -2])
    np.testing.assert_array_equal(dyadic.cond_expect(centered, 1).values[:, 0], [0, 0])
    with pytest.raises(DyadicError):
        dyadic.cond_expect(f, 3)


def test_refine_examples():
    f = step([1, 3])
    assert dyadic.refine(f, 1) is f
    np.testing.assert_array_equal(dyadic.refine(f, 2).values[:, 0], [1, 1, 3, 3])
    with pytest.raises(DyadicError):
        dyadic.refine(dyadic.refine(f, 2), 1)


def random_step(seed, depth, dim=2, space=None):
    rng = np.random.default_rng(seed)
    return StepFunction(rng.normal(size=(2**depth, dim)), space or sp.lp(1.5, dim))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 6), st.floats(1, 6))
def test_refine_invariance(seed, depth, p):
    f = random_step(seed, depth)
    g = random_step(seed + 1, depth)
    F = dyadic.refine(f, depth + 3)
    assert dyadic.lp_norm(F, p) == pytest.approx(dyadic.lp_norm(f, p), rel=1e-12)
    assert dyadic.pairing(F, g) == pytest.approx(dyadic.pairing(f, g), abs=1e-12)
    for k in range(depth + 1):
        a = dyadic.cond_expect(F, k).values
        b = dyadic.cond_expect(f, k).values
        np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 6))
def test_lp_norm_monotone_in_p(seed, depth):
    f = random_step(seed, depth)
    vals = [dyadic.lp_norm(f, p) for p in (1, 1.25, 1.5, 2, 3, 5)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 5), st.floats(1.05, 8), st.floats(1.0, 4.0))
def test_holder(seed, depth, p, r):
    X = sp.lp(r, 3)
    f = random_step(seed, depth, 3, X)
    g = random_step(seed + 7, depth, 3, X.dual())
    assert abs(dyadic.pairing(f, g)) <= dyadic.lp_norm(f, p) * dyadic.lp_norm_dual(
        StepFunction(g.values, X), p) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_cond_expect_tower_and_integral(seed, depth):
    f = random_step(seed, depth)
    one = StepFunction.constant(np.ones(2), f.space)
    for k in range(depth + 1):
        ek = dyadic.cond_expect(f, k)
        assert dyadic.pairing(ek, one) == pytest.approx(dyadic.pairing(f, one), abs=1e-12)
        np.testing.assert_allclose(dyadic.cond_expect(ek, k).values, ek.values, atol=0)
        for j in range(k + 1):
            np.testing.assert_allclose(dyadic.cond_expect(ek, j).values,
                                       dyadic.cond_expect(f, j).values, atol=1e-12)


def test_arithmetic_aligns_depths():
    f, g = step([1, 3]), step([1, 2, 3, 4])
    np.testing.assert_array_equal((f + g).values[:, 0], [2, 3, 6, 7])
    np.testing.assert_array_equal((g - f).values[:, 0], [0, 1, 0, 1])
    np.testing.assert_array_equal((-f).values[:, 0], [-1, -3])
    assert dyadic.integral(g)[0] == 2.5
