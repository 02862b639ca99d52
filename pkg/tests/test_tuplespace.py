import pytest

from sparsedistal import predicate as P
from sparsedistal.operator import as_tuple, dot
from sparsedistal.predicate import SubPredicate, whole
from sparsedistal.tuplespace import (UNBOUNDED, EmptySpace, Order, TupleSpace, TupleSpaceError,
                                     UncertifiedDelta, certified_space, compare,
                                     count_collisions, enumerate_in_order, extreme,
                                     find_collision, next_in_order, sufficient_delta)


def test_membership(pow2):
    ts = TupleSpace(whole(pow2), 3, 2)
    assert ts.contains((16, 4, 1))
    assert not ts.contains((16, 8, 1))  # 16 = σ¹·8, the gap needs two steps
    assert not ts.contains((16, 4))
    assert ts.min_lex() == (16, 4, 1)


def test_delta_must_be_multiple_of_d(pow2):
    with pytest.raises(TupleSpaceError):
        TupleSpace(SubPredicate(pow2, 0, 2), 2, 3)


def test_members_enumeration(pow2):
    ts = TupleSpace(whole(pow2), 2, 1)
    got = sorted(ts.members(8))
    assert got == [(2, 1), (4, 1), (4, 2), (8, 1), (8, 2), (8, 4)]


def test_ascending_values(example_space):
    vals = [v for _, v in enumerate_in_order(example_space, (1, 2, 4), 4)]
    assert vals == [28, 44, 52, 56]


def test_collision_at_delta_one(pow2):
    hit = find_collision((1, 2, 4), whole(pow2), 3, 1, 64)
    assert hit is not None and hit[2] == dot(as_tuple((1, 2, 4)), pow2, hit[0])
    assert count_collisions((1, 2, 4), whole(pow2), 3, 2, 2 ** 12) == 0


def test_sufficient_delta(pow2, fib):
    assert sufficient_delta((1, 2, 4), whole(pow2), 3).value == 2
    assert sufficient_delta((1, -2), whole(pow2), 2).value == 3
    assert sufficient_delta((1, 2), whole(fib), 2).value == 3


def test_uncertified_is_rejected(pow2):
    ts = TupleSpace(whole(pow2), 3, 1)
    with pytest.raises(UncertifiedDelta):
        ts.certify((1, 2, 4))
    with pytest.raises(UncertifiedDelta):
        ts.require((1, 2, 4))


def test_compare_twisted(pow2):
    ts = certified_space(whole(pow2), 2, 3, (1, -2))
    # A_2 < 0 flips the order in the second coordinate
    assert compare(ts, (1, -2), (16, 1), (16, 2)) == Order.GREATER
    assert compare(ts, (1, -2), (32, 1), (16, 2)) == Order.GREATER


def test_extreme_with_box(example_space):
    A = (1, 2, 4)
    assert extreme(example_space, A, "min") == (16, 4, 1)
    assert extreme(example_space, A, "max") is UNBOUNDED
    assert extreme(example_space, A, "max", z1=32) == (32, 8, 2)
    assert extreme(example_space, A, "min", box_lo=(0, 8, 0)) == (32, 8, 1)
    with pytest.raises(EmptySpace):
        extreme(example_space, A, "min", box_hi=(8, None, None))


def test_next_in_order(example_space):
    ops = as_tuple((1, 2, 4))
    t = example_space.idxs((32, 4, 1))
    nxt = example_space.vals(next_in_order(example_space, ops, t))
    assert nxt == (32, 8, 1)
    prev = example_space.vals(next_in_order(example_space, ops, t, ascending=False))
    assert prev == (16, 4, 1)
