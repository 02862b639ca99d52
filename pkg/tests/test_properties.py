"""Hypothesis property suites checked against brute-force oracles."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sparsedistal import predicate as P
from sparsedistal.formula import (Affine, Cmp, Congruence, Const, Context, Divides, Gt0, Not,
                                  And, Or, Var, clauses_formula, evaluate, from_list,
                                  normalize_atoms, to_list)
from sparsedistal.operator import Operator, Sign, apply, as_tuple, dot, sign_classify
from sparsedistal.pdelta import inf_value, p_delta, q_delta, reduction_check, WindowOracle
from sparsedistal.predicate import whole
from sparsedistal.shd import order_shd, verify_shd
from sparsedistal.tuplespace import certified_space, next_in_order, compare, Order

POW2 = P.power(2)
FIB = P.fibonacci()
SPACE = certified_space(whole(POW2), 3, 2, (1, 2, 4))
ORACLE = WindowOracle(SPACE, (1, 2, 4), 22)
FIB2 = certified_space(whole(FIB), 2, 3, (1, 2))
FIB2_ORACLE = WindowOracle(FIB2, (1, 2), 30)

coeffs = st.lists(st.integers(-10, 10), min_size=1, max_size=6)
fast = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(coeffs)
def test_sign_on_powers_is_lambda_sign(cs):
    lam = sum(c * 2 ** i for i, c in enumerate(cs))
    sc = sign_classify(Operator(tuple(cs)), POW2)
    assert sc.mode == "exact"
    assert sc.s == (lam > 0) - (lam < 0)


@fast
@given(coeffs, coeffs, st.integers(0, 30))
def test_apply_is_linear(a, b, i):
    z = FIB.nth(i)
    A, B = Operator(tuple(a)), Operator(tuple(b))
    assert apply(A + B, FIB, z) == apply(A, FIB, z) + apply(B, FIB, z)


@fast
@given(coeffs, st.integers(0, 12))
def test_sign_matches_tail_values_on_fibonacci(cs, shift):
    op = Operator(tuple(cs))
    sc = sign_classify(op, FIB)
    tail = [apply(op, FIB, FIB.nth(i)) for i in range(60 + shift, 70 + shift)]
    if sc.sign == Sign.ZERO:
        assert all(v == 0 for v in tail)
    else:
        assert all((v > 0) == (sc.s > 0) and v != 0 for v in tail)


@fast
@given(st.integers(-10 ** 5, 10 ** 6))
def test_p_below_q_at_or_above(x):
    p, q = p_delta(SPACE, (1, 2, 4), x), q_delta(SPACE, (1, 2, 4), x)
    if x > inf_value(SPACE, (1, 2, 4)):
        assert p.value < x <= q.value
        nxt = next_in_order(SPACE, as_tuple((1, 2, 4)), SPACE.idxs(p.tuple))
        assert SPACE.vals(nxt) == q.tuple
    else:
        assert p.boundary_case and q.tuple == p.tuple


@fast
@given(st.integers(-10 ** 5, 10 ** 6))
def test_fast_path_equals_oracle(x):
    assert (p_delta(SPACE, (1, 2, 4), x), q_delta(SPACE, (1, 2, 4), x)) == (ORACLE.p(x), ORACLE.q(x))


@fast
@given(st.integers(-10 ** 5, 10 ** 5))
def test_fast_path_equals_oracle_fibonacci(x):
    assert p_delta(FIB2, (1, 2), x) == FIB2_ORACLE.p(x)
    assert q_delta(FIB2, (1, 2), x) == FIB2_ORACLE.q(x)


@fast
@given(st.integers(-1000, 10 ** 6), st.integers(0, 5000))
def test_p_is_monotone(x, dx):
    assert p_delta(SPACE, (1, 2, 4), x).value <= p_delta(SPACE, (1, 2, 4), x + dx).value


@fast
@given(st.integers(29, 10 ** 6))
def test_reduction_identity(a):
    rep = reduction_check(SPACE, (1, 2, 4), a)
    assert rep.status in ("holds", "precondition")
    if rep.status == "holds":
        assert rep.lhs == rep.rhs


@fast
@given(st.integers(0, 12), st.integers(0, 12), st.integers(0, 12), st.integers(0, 12))
def test_twisted_order_agrees_with_values(a, b, c, d):
    ts = certified_space(whole(POW2), 2, 3, (1, -2))
    z, w = (2 ** (a + 3 + b), 2 ** b), (2 ** (c + 3 + d), 2 ** d)
    va, vb = dot(as_tuple((1, -2)), POW2, z), dot(as_tuple((1, -2)), POW2, w)
    got = compare(ts, (1, -2), z, w)
    assert got == (Order.LESS if va < vb else Order.GREATER if va > vb else Order.EQUAL)


# random quantifier-free Presburger formulas in x, y

def _affine():
    return st.builds(lambda cx, cy, k: Affine.of((cx, Var("x")), (cy, Var("y")), const=k),
                     st.integers(-3, 3), st.integers(-3, 3), st.integers(-10, 10))


def _atom():
    return st.one_of(
        st.builds(Gt0, _affine()),
        st.builds(lambda op, a, b: Cmp(op, a, b), st.sampled_from(["<", "<=", "=", "!="]),
                  _affine(), _affine()),
        st.builds(Congruence, _affine(), st.integers(0, 3), st.integers(2, 4)),
        st.builds(Divides, st.integers(2, 3), _affine()),
    )


formulas = st.recursive(
    _atom(),
    lambda sub: st.one_of(st.builds(Not, sub),
                          st.builds(lambda a, b: And((a, b)), sub, sub),
                          st.builds(lambda a, b: Or((a, b)), sub, sub)),
    max_leaves=5,
)


@settings(max_examples=80, deadline=None)
@given(formulas)
def test_normal_form_equivalent(f):
    g = clauses_formula(normalize_atoms(f))
    xs = np.arange(-25, 26)
    for y in range(-4, 5):
        a = np.broadcast_to(np.asarray(evaluate(f, {"x": xs, "y": y}), bool), xs.shape)
        b = np.broadcast_to(np.asarray(evaluate(g, {"x": xs, "y": y}), bool), xs.shape)
        assert (a == b).all()


@settings(max_examples=80, deadline=None)
@given(formulas)
def test_list_roundtrip(f):
    assert from_list(to_list(f), Context(POW2)) == f


@settings(max_examples=40, deadline=None)
@given(formulas, st.lists(st.integers(-20, 20), min_size=2, max_size=5, unique=True))
def test_order_systems_verify(f, ys):
    sys_ = order_shd(f, ("y",))
    B = [(y,) for y in ys]
    rep = verify_shd(f, sys_, B, (-60, 60), (-60, 60))
    assert rep, rep.counterexample


@settings(max_examples=50, deadline=None)
@given(formulas, st.integers(-30, 30))
def test_vector_scalar_agree(f, y):
    xs = np.arange(-20, 21)
    vec = np.broadcast_to(np.asarray(evaluate(f, {"x": xs, "y": y}), bool), xs.shape)
    sc = [bool(evaluate(f, {"x": int(a), "y": y})) for a in xs]
    assert list(vec) == sc
