import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strongtype import dyadic, martingale as mg, spaces as sp
from strongtype.dyadic import StepFunction
from strongtype.martingale import DifferenceSequence, MartingaleError

S1 = sp.lp(2, 1)


def scalar_seq(initial, *levels):
    return DifferenceSequence(tuple(np.asarray(v, dtype=float).reshape(-1, 1) for v in levels), 1,
                              None if initial is None else [initial])


def test_to_step_examples():
    x = np.array([1.0, -1.0])
    seq = DifferenceSequence.empty(2, x)
    np.testing.assert_array_equal(mg.to_step(seq, 0, partial=True).values, [x])
    s = scalar_seq(None, [2.0])
    np.testing.assert_array_equal(mg.to_step(s, 1).values[:, 0], [2, -2])
    s = scalar_seq(1.0, [2.0])
    np.testing.assert_array_equal(mg.to_step(s, 1, partial=True).values[:, 0], [3, -1])
    with pytest.raises(MartingaleError):
        mg.to_step(s, 2)


def test_validate_examples():
    x = np.array([2.0, 5.0])
    E = sp.euclidean(2)
    path = [StepFunction.constant(x, E, depth=k) for k in range(3)]
    seq = mg.validate(path)
    np.testing.assert_array_equal(seq.initial, x)
    assert all(not np.any(v) for v in seq.levels)
    seq = mg.validate([StepFunction(np.array([4.0]), S1), StepFunction(np.array([2.0, 6.0]), S1)])
    assert seq.levels[0][0, 0] == -2.0
    with pytest.raises(MartingaleError) as info:
        mg.validate([StepFunction(np.array([4.0]), S1), StepFunction(np.array([2.0, 5.0]), S1)])
    assert info.value.level == 1 and info.value.index == 0


def test_validate_depth_order():
    with pytest.raises(MartingaleError):
        mg.validate([StepFunction(np.array([1.0, 1.0]), S1)])


def test_from_rademacher_examples():
    seq = mg.from_rademacher([np.array([1.0, 2.0])])
    assert seq.depth == 0
    x1 = np.array([0.5, -1.0])
    seq = mg.from_rademacher([np.zeros(2), x1])
    np.testing.assert_array_equal(mg.to_step(seq, 1).values, [x1, -x1])
    seq = mg.from_rademacher([[1.0], [1.0], [1.0]])
    np.testing.assert_array_equal(mg.to_step(seq, 2, partial=True).values[:, 0], [3, 1, 1, -1])
    with pytest.raises(MartingaleError):
        mg.from_rademacher([[1.0], [1.0, 2.0]])


def test_glue_examples():
    e = DifferenceSequence.empty(2)
    x = np.array([1.0, 3.0])
    g = mg.glue(e, e, x, x)
    assert g.depth == 1 and not np.any(g.levels[0])
    g = mg.glue(DifferenceSequence.empty(1), DifferenceSequence.empty(1), [1.0], [-1.0])
    np.testing.assert_array_equal(mg.to_step(g, 1).values[:, 0], [1, -1])
    a, b = scalar_seq(None, [0.3]), scalar_seq(None, [-0.7])
    g = mg.glue(a, b, [1.0], [2.0])
    np.testing.assert_array_equal(g.levels[1][:, 0], [0.3, -0.7])


def test_glue_rejects_mismatch():
    a = scalar_seq(None, [1.0])
    with pytest.raises(MartingaleError):
        mg.glue(a, DifferenceSequence.empty(1), [0.0], [0.0])
    with pytest.raises(MartingaleError):
        mg.glue(a.with_initial([1.0]), a, [0.0], [0.0])
    with pytest.raises(MartingaleError):
        mg.glue(a, DifferenceSequence((np.zeros((1, 2)),), 2), [0.0], [0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 4), st.sampled_from([1, 1.5, 2, 3]))
def test_glue_averaging_identity(seed, depth, q):
    X = sp.lp(3, 2)
    sp_ = mg.random_sequence(seed, depth, 2)
    sm = mg.random_sequence(seed + 1, depth, 2)
    rng = np.random.default_rng(seed)
    xp, xm = rng.normal(size=2), rng.normal(size=2)
    g = mg.glue(sp_, sm, xp, xm)
    mg.validate(mg.partial_sums(g.with_initial((xp + xm) / 2), X))
    lhs = dyadic.lp_norm(mg.to_step(g.with_initial((xp + xm) / 2), depth + 1, X, partial=True), q) ** q
    a = dyadic.lp_norm(mg.to_step(sp_.with_initial(xp), depth, X, partial=True), q) ** q
    b = dyadic.lp_norm(mg.to_step(sm.with_initial(xm), depth, X, partial=True), q) ** q
    assert lhs == pytest.approx((a + b) / 2, rel=1e-12, abs=1e-12)


def test_apply_operator_examples():
    seq = mg.random_sequence(3, 3, 2, with_initial=True)
    ident = sp.identity(sp.euclidean(2))
    assert mg.apply_operator(ident, seq).equals(seq)
    zero = sp.LinearOperator(np.zeros((2, 2)), sp.euclidean(2), sp.euclidean(2))
    out = mg.apply_operator(zero, seq)
    assert not np.any(out.flat()) and not np.any(out.initial)
    D = sp.LinearOperator(np.diag([2.0, 1.0]), sp.euclidean(2), sp.euclidean(2))
    out = mg.apply_operator(D, seq)
    for k in range(4):
        np.testing.assert_allclose(mg.to_step(out, k).values,
                                   mg.to_step(seq, k).values @ np.diag([2.0, 1.0]), atol=0)
    with pytest.raises(MartingaleError):
        mg.apply_operator(sp.identity(sp.euclidean(3)), seq)


def test_random_sequence_examples():
    assert mg.random_sequence(5, 3, 2).equals(mg.random_sequence(5, 3, 2))
    assert not np.any(mg.random_sequence(5, 3, 2, scale=0.0).flat())
    d1 = mg.to_step(mg.random_sequence(9, 3, 2), 1)
    assert np.all(d1.values.mean(axis=0) == 0)
    with pytest.raises(MartingaleError):
        mg.random_sequence(0, dyadic.DEPTH_CAP + 1, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_symmetry_all_levels(seed, depth):
    X = sp.lp(1.5, 2)
    seq = mg.random_sequence(seed, depth, 2, with_initial=True)
    f = mg.to_step(seq, 0, X, partial=True)
    for k in range(1, depth + 1):
        dk = mg.to_step(seq, k, X)
        for q in (1, 1.5, 2, 3):
            assert abs(dyadic.lp_norm(f + dk, q) - dyadic.lp_norm(f - dk, q)) <= 1e-12
        f = f + dk


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 6), st.booleans())
def test_validate_round_trip(seed, depth, with_initial):
    seq = mg.random_sequence(seed, depth, 3, with_initial=with_initial)
    back = mg.validate(mg.partial_sums(seq))
    expect = seq if with_initial else seq.with_initial(np.zeros(3))
    np.testing.assert_allclose(back.flat(), expect.flat(), rtol=0, atol=1e-14)
    # on dyadic rationals every partial sum is exact, so the round trip is bitwise
    exact = DifferenceSequence.from_flat(np.round(seq.flat() * 1024) / 1024, depth, 3,
                                         None if seq.initial is None else np.round(seq.initial * 1024) / 1024)
    back = mg.validate(mg.partial_sums(exact))
    assert back.equals(exact if with_initial else exact.with_initial(np.zeros(3)))


def test_rademacher_levels_constant():
    seq = mg.from_rademacher([np.ones(2), [1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    for v in seq.levels:
        assert np.all(v == v[0])


def test_serialization_and_padding():
    seq = mg.random_sequence(1, 3, 2, with_initial=True)
    assert DifferenceSequence.from_dict(seq.to_dict()).equals(seq)
    assert DifferenceSequence.from_flat(seq.flat(), 3, 2, seq.initial).equals(seq)
    p = seq.padded(5)
    assert p.depth == 5 and not np.any(p.levels[4])
    with pytest.raises(MartingaleError):
        seq.padded(2)
    with pytest.raises(MartingaleError):
        DifferenceSequence((np.zeros((2, 1)),), 1)


def test_batched_leaves_match_partial_sums():
    seq = mg.random_sequence(4, 4, 2, with_initial=True)
    leaves = mg.batch_leaves(seq.initial[None], [v[None] for v in seq.levels])[0]
    np.testing.assert_allclose(leaves, mg.to_step(seq, 4, partial=True).values, atol=1e-15)
