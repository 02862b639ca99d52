"""Sparse predicates, gapped tuple spaces, P_Δ/Q_Δ and strong honest definitions
for (ℤ, <, +, R)."""

__version__ = "0.1.0"

from .operator import Operator, OperatorTuple, Sign, sign_classify
from .pdelta import p_delta, pq_oracle, q_delta
from .predicate import Predicate, SubPredicate, factorial, fibonacci, power, whole
from .tuplespace import TupleSpace, certified_space, sufficient_delta

__all__ = [
    "Operator", "OperatorTuple", "Predicate", "Sign", "SubPredicate", "TupleSpace",
    "certified_space", "factorial", "fibonacci", "p_delta", "power", "pq_oracle", "q_delta",
    "sign_classify", "sufficient_delta", "whole",
]
