import random

import pytest

from sparsedistal import predicate as P
from sparsedistal.pdelta import (CaseI, CaseII, HorizonTooSmall, PreconditionError, WindowOracle,
                                 inf_value, innocuous_case, p1, p_delta, plemma_i, plemma_ii,
                                 pq_oracle, q_delta, reduction_check, sup_value)
from sparsedistal.predicate import whole
from sparsedistal.tuplespace import UncertifiedDelta, certified_space, TupleSpace

A = (1, 2, 4)


def test_worked_example(example_space):
    p, q = p_delta(example_space, A, 47), q_delta(example_space, A, 47)
    assert (p.tuple, p.value, p.boundary_case) == ((32, 4, 1), 44, False)
    assert (q.tuple, q.value) == ((32, 8, 1), 52)


def test_boundary_branch(example_space):
    r = p_delta(example_space, A, 28)
    assert r.tuple == (16, 4, 1) and r.boundary_case
    r = p_delta(example_space, A, 29)
    assert r.tuple == (16, 4, 1) and not r.boundary_case


def test_q_below_inf(example_space):
    assert q_delta(example_space, A, 0).tuple == (16, 4, 1)
    assert q_delta(example_space, A, 45).tuple == (32, 8, 1)
    assert q_delta(example_space, A, 44).tuple == (32, 4, 1)


def test_needs_certificate(pow2):
    with pytest.raises(UncertifiedDelta):
        p_delta(TupleSpace(whole(pow2), 3, 2), A, 47)


def test_inf_sup(example_space, pow2):
    assert inf_value(example_space, A) == 28
    assert sup_value(example_space, A) is None
    neg = certified_space(whole(pow2), 1, 0, (-1,))
    assert inf_value(neg, (-1,)) is None and sup_value(neg, (-1,)) == -1


def test_negative_operator(pow2):
    ts = certified_space(whole(pow2), 1, 0, (-1,))
    assert p_delta(ts, (-1,), -5).tuple == (8,)
    assert q_delta(ts, (-1,), -5).tuple == (4,)


def test_oracle_small(pow2):
    ts = certified_space(whole(pow2), 1, 0, (1,))
    p, q = pq_oracle(ts, (1,), 5, 20)
    assert p.tuple == (4,) and q.tuple == (8,)


def test_oracle_horizon_too_small(example_space):
    o = WindowOracle(example_space, A, 8)
    with pytest.raises(HorizonTooSmall):
        o.q(10 ** 6)


def test_oracle_matches_fast_path(example_space):
    rng = random.Random(3)
    o = WindowOracle(example_space, A, 24)
    for _ in range(300):
        x = rng.randint(-1000, 200_000)
        assert (p_delta(example_space, A, x), q_delta(example_space, A, x)) == (o.p(x), o.q(x))


def test_plemma(example_space):
    for x in range(-50, 3000, 7):
        assert plemma_i(example_space, A, x)
        assert plemma_ii(example_space, A, x) in (-1, 0, 1)


def test_reduction_holds(example_space):
    rep = reduction_check(example_space, A, 47)
    assert rep and rep.lhs == rep.rhs == (4, 1)


def test_reduction_flags_precondition(example_space):
    # 29 exceeds max{𝐀·z : z_1 = 16} = 28, so the identity is not claimed
    rep = reduction_check(example_space, A, 29)
    assert rep.status == "precondition"
    assert rep.identity_holds


def test_innocuous_cases(pow2):
    ts = certified_space(whole(pow2), 1, 0, (1,))
    assert innocuous_case(ts, (1,), 5, 0, 0, 100) == CaseI(0)
    got = innocuous_case(ts, (1,), 5, 0, 90, 100)
    assert isinstance(got, (CaseI, CaseII))
    assert p1(ts, (1,), 100) == 64
    with pytest.raises(PreconditionError):
        innocuous_case(ts, (1,), 5, 10, 0, 100)
