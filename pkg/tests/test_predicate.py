from fractions import Fraction

import pytest

from sparsedistal import predicate as P
from sparsedistal.predicate import GrowthProfile, NotAMember, SubPredicate


def test_power_terms(pow2):
    assert pow2.prefix(6) == [1, 2, 4, 8, 16, 32]
    assert pow2.nth(10) == 1024
    assert pow2.index_of(64) == 6


def test_fibonacci_is_a_set(fib):
    assert fib.prefix(7) == [1, 2, 3, 5, 8, 13, 21]


def test_factorial_terms():
    assert P.factorial().prefix(5) == [1, 2, 6, 24, 120]


def test_successor_clamps_at_min(pow2):
    assert pow2.successor(8, 2) == 32
    assert pow2.successor(2, -5) == 1
    assert pow2.successor(8, 0) == 8


def test_non_member_raises(pow2):
    with pytest.raises(NotAMember):
        pow2.index_of(6)
    assert not pow2.contains(6)
    assert not pow2.contains(-4)


def test_floor_index(pow2):
    assert pow2.floor_index(0) == -1
    assert pow2.floor_index(1) == 0
    assert pow2.floor_index(47) == 5


def test_recurrence_and_explicit():
    r = P.recurrence([3, -2], [2, 3])
    assert r.prefix(5) == [2, 3, 5, 9, 17]
    e = P.explicit([1, 4, 9])
    assert e.prefix(10) == [1, 4, 9]
    assert e.finite
    with pytest.raises(IndexError):
        e.nth(3)


def test_subpredicate(pow2):
    sub = SubPredicate(pow2, 1, 2)
    assert [sub.nth(t) for t in range(4)] == [2, 8, 32, 128]
    assert sub.contains(32) and not sub.contains(16) and not sub.contains(1)
    assert sub.successor(8) == 32
    assert sub.successor(8, -3) == 2
    assert sub.terms_upto(100) == [2, 8, 32]


def test_subpredicate_rejects_bad_params(pow2):
    with pytest.raises(P.PredicateError):
        SubPredicate(pow2, 0, 0)


def test_congruence_period(pow2, fib):
    assert P.congruence_period(pow2, 8) == (3, 1)
    assert P.congruence_period(pow2, 3) == (0, 2)
    # Pisano period of 2 is 3
    assert P.congruence_period(fib, 2)[1] == 3


def test_regular_window(pow2, fib):
    assert P.check_regular_window(pow2).verdict == "consistent"
    assert P.check_regular_window(fib).verdict == "consistent"
    assert P.check_regular_window(P.factorial()).verdict == "consistent"


def test_regular_window_refutes_shifted_powers():
    r = P.recurrence([3, -2], [2, 3], GrowthProfile.rational(2))
    rep = P.check_regular_window(r)
    assert rep.verdict == "refuted"
    assert rep.witness == 0 and rep.witness_value == -1


def test_profile_rejects_reducible_minpoly():
    with pytest.raises(P.PredicateError):
        GrowthProfile.algebraic((-2, -1, 1), (Fraction(3, 2), Fraction(5, 2)))


def test_from_spec_roundtrip():
    p = P.from_spec({"kind": "power", "base": 3})
    assert p.prefix(4) == [1, 3, 9, 27]
    q = P.from_spec({"kind": "recurrence", "coeffs": [1, 1], "init": [1, 2],
                     "profile": {"theta": "algebraic", "minpoly": [-1, -1, 1],
                                 "interval": ["3/2", "2"]}})
    assert q.prefix(5) == [1, 2, 3, 5, 8]
    assert q.profile.has_minpoly
    with pytest.raises(P.PredicateError):
        P.from_spec({"kind": "nope"})
