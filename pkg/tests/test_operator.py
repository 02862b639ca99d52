import pytest

from sparsedistal import predicate as P
from sparsedistal.operator import (Operator, OperatorError, OperatorTuple, Sign, apply,
                                   as_tuple, beats_witness, dot, innocuous_lambda,
                                   s2_violation, s2_witness, sign_classify)
from sparsedistal.predicate import GrowthProfile, SubPredicate, whole


def test_canonical_form():
    assert Operator((1, 2, 0, 0)).coeffs == (1, 2)
    assert Operator((0, 0)).is_zero
    assert Operator.sigma(2).coeffs == (0, 0, 1)
    assert (Operator((1, 1)) - Operator((1, 1))).is_zero


def test_apply_examples(pow2, fib):
    assert apply(Operator((1, 1, 1)), pow2, 4) == 28
    assert apply(Operator((-1, 1)), fib, 8) == 5
    assert apply(Operator((1,)), fib, 13) == 13
    assert apply(Operator(), pow2, 16) == 0


def test_dot_examples(pow2):
    A = as_tuple((1, 2, 4))
    assert dot(A, pow2, (16, 4, 1)) == 28
    assert dot(A, pow2, (32, 4, 1)) == 44
    assert dot(A, pow2, (32, 16, 8)) == dot(A, pow2, (64, 8, 4)) == 96
    with pytest.raises(OperatorError):
        dot(A, pow2, (1, 2))


def test_standard_tuples():
    F2 = OperatorTuple.standard(2, 3)
    assert F2.standard_index() == 2
    assert as_tuple((1, 2, 4)).standard_index() is None


def test_sign_examples(pow2, fib):
    assert sign_classify(Operator((-2, 1)), pow2).sign == Sign.ZERO
    assert sign_classify(Operator((-3, 1)), pow2).sign == Sign.NEGATIVE
    assert sign_classify(Operator((-1, -1, 1)), fib).sign == Sign.ZERO
    assert sign_classify(Operator((-1, -1, 1)), fib).mode == "exact"
    assert sign_classify(Operator((-5, 0, 1)), fib).sign == Sign.NEGATIVE  # φ² ≈ 2.618
    assert sign_classify(Operator((-2, 0, 1)), fib).sign == Sign.POSITIVE
    assert sign_classify(Operator((-1000, 1)), P.factorial()).sign == Sign.POSITIVE


def test_sign_heuristic_for_empirical():
    e = P.explicit([n * n for n in range(1, 200)])
    sc = sign_classify(Operator((-1, 1)), e)
    assert sc.mode == "heuristic"


def test_s2_witness(pow2, fib):
    assert s2_witness(Operator((-1, 1)), pow2).value == 1
    assert s2_witness(Operator((1,)), pow2).value == 1
    assert s2_witness(Operator((1,)), fib).value == 1
    with pytest.raises(OperatorError):
        s2_witness(Operator((-2, 1)), pow2)


def test_beats_witness(pow2, fib):
    assert beats_witness(Operator((1,)), Operator((4,)), pow2).value == 3
    assert beats_witness(Operator((1,)), Operator((0, -1)), pow2).value == 0
    assert beats_witness(Operator((0, 1)), Operator((2,)), fib).value == 1


def test_innocuous_lambda(pow2):
    assert innocuous_lambda(Operator((1,)), whole(pow2)).value == 5
    assert innocuous_lambda(Operator((1,)), SubPredicate(pow2, 0, 2)).value == 6
    assert innocuous_lambda(Operator((2,)), whole(pow2)).value == 5


def test_s2_violation_on_squares():
    sq = P.explicit([n * n for n in range(1, 10_001)])
    z = s2_violation(Operator((-1, 1)), sq, 3)
    assert z is not None and apply(Operator((-1, 1)), sq, sq.successor(z, 3)) < z
    assert s2_violation(Operator((-1, 1)), P.power(2), 1) is None


def test_shifted_power_operator_is_constant():
    r = P.recurrence([3, -2], [2, 3], GrowthProfile.rational(2))
    op = Operator((2, -1))
    assert {apply(op, r, z) for z in r.prefix(40)} == {1}
