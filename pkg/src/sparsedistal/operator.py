"""Shift-polynomial operators a_k σ^k + ... + a_0 σ^0 acting on a predicate."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import poly
from .predicate import EMPIRICAL, INFINITY, Predicate, SubPredicate

REFINE_BUDGET = 256
DEFAULT_HORIZON = 60
SEARCH_LIMIT = 512


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class Operator:
    """Integer coefficients, index = power of σ; trailing zeros are stripped."""

    coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", poly.strip(tuple(int(c) for c in self.coeffs)))

    @classmethod
    def const(cls, c: int) -> "Operator":
        return cls((c,))

    @classmethod
    def identity(cls) -> "Operator":
        return cls((1,))

    @classmethod
    def sigma(cls, k: int = 1, c: int = 1) -> "Operator":
        return cls((0,) * k + (c,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "Operator") -> "Operator":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return Operator(tuple(x + y for x, y in zip(a, b)))

    def __neg__(self) -> "Operator":
        return Operator(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Operator") -> "Operator":
        return self + (-other)

    def scale(self, c: int) -> "Operator":
        return Operator(tuple(c * x for x in self.coeffs))

    def shift(self, k: int) -> "Operator":
        """The operator A∘σ^k for k >= 0."""
        if k < 0:
            raise OperatorError("only non-negative shifts compose polynomially")
        return Operator((0,) * k + self.coeffs) if self.coeffs else self

    def abs_sum(self) -> int:
        return sum(abs(c) for c in self.coeffs)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i, c in enumerate(self.coeffs):
            if c:
                parts.append(f"{c}σ^{i}")
        return "+".join(reversed(parts))

    def to_json(self) -> dict:
        return {"coeffs": [str(c) for c in self.coeffs]}


def as_operator(x) -> Operator:
    """Accepts an Operator, an int (constant operator) or a coefficient list."""
    if isinstance(x, Operator):
        return x
    if isinstance(x, int):
        return Operator.const(x)
    if isinstance(x, dict):
        return Operator(tuple(int(c) for c in x["coeffs"]))
    return Operator(tuple(int(c) for c in x))


@dataclass(frozen=True)
class OperatorTuple:
    ops: tuple[Operator, ...]

    def __post_init__(self):
        ops = tuple(as_operator(o) for o in self.ops)
        if not ops:
            raise OperatorError("an operator tuple needs arity >= 1")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def of(cls, *ops) -> "OperatorTuple":
        return cls(tuple(ops))

    @classmethod
    def standard(cls, i: int, n: int) -> "OperatorTuple":
        """F^i: identity in position i (1-based), zero elsewhere."""
        if not 1 <= i <= n:
            raise OperatorError("standard tuple index out of range")
        return cls(tuple(Operator.identity() if j == i else Operator() for j in range(1, n + 1)))

    @property
    def n(self) -> int:
        return len(self.ops)

    def __len__(self):
        return len(self.ops)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return OperatorTuple(self.ops[i])
        return self.ops[i]

    def __iter__(self):
        return iter(self.ops)

    def __neg__(self) -> "OperatorTuple":
        return OperatorTuple(tuple(-a for a in self.ops))

    def __sub__(self, other: "OperatorTuple") -> "OperatorTuple":
        return OperatorTuple(tuple(a - b for a, b in zip(self.ops, other.ops)))

    def standard_index(self) -> Optional[int]:
        """i if this tuple is F^i, else None."""
        for i in range(1, self.n + 1):
            if self == OperatorTuple.standard(i, self.n):
                return i
        return None

    def nonzero(self, pred: Predicate) -> bool:
        return all(sign_classify(a, pred).sign != Sign.ZERO for a in self.ops)

    def to_json(self) -> dict:
        return {"ops": [[str(c) for c in a.coeffs] for a in self.ops]}


def as_tuple(x) -> OperatorTuple:
    if isinstance(x, OperatorTuple):
        return x
    if isinstance(x, dict):
        x = x["ops"]
    return OperatorTuple(tuple(as_operator(o) for o in x))


def apply(op: Operator, pred: Predicate, z: int) -> int:
    """Σ a_i σ^i z."""
    if not op.coeffs:
        pred.index_of(z)
        return 0
    i = pred.index_of(z)
    pred.extend_to(i + op.degree)
    return sum(c * pred.nth(i + k) for k, c in enumerate(op.coeffs) if c)


def dot(ops: OperatorTuple, pred: Predicate, z: Sequence[int]) -> int:
    if len(z) != ops.n:
        raise OperatorError(f"arity mismatch: {len(z)} vs {ops.n}")
    return sum(apply(a, pred, zi) for a, zi in zip(ops.ops, z))


class Sign(enum.Enum):
    ZERO = "zero"
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @property
    def value_int(self) -> int:
        return {"zero": 0, "positive": 1, "negative": -1}[self.value]


@dataclass(frozen=True)
class SignClass:
    sign: Sign
    mode: str = "exact"  # or "heuristic"
    horizon: Optional[int] = None

    @property
    def s(self) -> int:
        return self.sign.value_int

    def to_json(self) -> dict:
        out = {"sign": self.sign.value, "mode": self.mode}
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out


def _heuristic_sign(op: Operator, pred: Predicate, horizon: int) -> SignClass:
    n = pred.materialized if pred.finite else horizon
    lo = max(n // 2, 0)
    vals = []
    for i in range(lo, n):
        try:
            vals.append(apply(op, pred, pred.nth(i)))
        except IndexError:
            break
    if not vals or all(v == 0 for v in vals[-max(len(vals) // 2, 1):]):
        return SignClass(Sign.ZERO, "heuristic", horizon)
    last = vals[-1]
    return SignClass(Sign.POSITIVE if last > 0 else Sign.NEGATIVE, "heuristic", horizon)


def sign_classify(op: Operator, pred: Predicate, horizon: int = DEFAULT_HORIZON,
                  budget: int = REFINE_BUDGET) -> SignClass:
    """Eventual sign of z ↦ Az on R."""
    if op.is_zero:
        return SignClass(Sign.ZERO)
    prof = pred.profile
    if prof.kind == INFINITY:
        return SignClass(Sign.POSITIVE if op.coeffs[-1] > 0 else Sign.NEGATIVE)
    if prof.kind == EMPIRICAL:
        return _heuristic_sign(op, pred, horizon)
    # A(σ) acts as its remainder modulo the minimal polynomial
    rem = poly.remainder(op.coeffs, prof.minpoly)
    if not rem:
        return SignClass(Sign.ZERO)
    s, _ = poly.sign_at_root(rem, prof.minpoly, *prof.interval, budget=budget)
    if s is None:
        return _heuristic_sign(op, pred, horizon)
    return SignClass(Sign.POSITIVE if s > 0 else Sign.NEGATIVE)


@dataclass(frozen=True)
class Certified:
    """A constant verified on a window and, when possible, asymptotically.

    ``mode`` is "exact" when the asymptotic part was certified from the growth
    profile, "heuristic" when only the window check backs it.
    """

    value: int
    mode: str
    horizon: int

    def to_json(self) -> dict:
        return {"value": self.value, "mode": self.mode, "horizon": self.horizon}


def _window(pred: Predicate, horizon: int) -> list[int]:
    return pred.prefix(horizon + 1)


def _search(name: str, pred: Predicate, horizon: int, start: int, step: int,
            holds_on_window, certificate_op) -> Certified:
    """Least k in start, start+step, ... passing both checks."""
    for k in range(start, SEARCH_LIMIT, step):
        if not all(holds_on_window(k, z) for z in _window(pred, horizon)):
            continue
        sc = sign_classify(certificate_op(k), pred, horizon)
        if sc.sign == Sign.POSITIVE:
            return Certified(k, sc.mode, horizon)
    raise OperatorError(f"{name}: no certified constant below {SEARCH_LIMIT}")


def _nonzero_sign(op: Operator, pred: Predicate, horizon: int) -> int:
    sc = sign_classify(op, pred, horizon)
    if sc.sign == Sign.ZERO:
        raise OperatorError("operator is zero on the predicate")
    return sc.s


def s2_witness(op: Operator, pred: Predicate, horizon: int = DEFAULT_HORIZON) -> Certified:
    """Least Δ with Aσ^Δ z > z on the window and Aσ^Δ − σ^0 >_R 0."""
    if sign_classify(op, pred, horizon).sign != Sign.POSITIVE:
        raise OperatorError("s2_witness needs a positive operator")
    return _search(
        "s2_witness", pred, horizon, 0, 1,
        lambda D, z: apply(op, pred, pred.successor(z, D)) > z,
        lambda D: op.shift(D) - Operator.identity(),
    )


def s2_violation(op: Operator, pred: Predicate, delta: int,
                 horizon: int = DEFAULT_HORIZON) -> Optional[int]:
    """The least window z with Aσ^Δ z < z, or None when Δ passes on the window.

    For a finite predicate the window is every z whose shifts stay inside it.
    """
    reach = delta + max(op.degree, 0)
    pred.extend_to(horizon + reach)
    last = min(horizon, pred.materialized - 1 - reach)
    for i in range(max(last + 1, 0)):
        z = pred.nth(i)
        if apply(op, pred, pred.successor(z, delta)) < z:
            return z
    return None


def beats_witness(a: Operator, b: Operator, pred: Predicate,
                  horizon: int = DEFAULT_HORIZON) -> Certified:
    """Least Δ with |Aσ^Δ z| > Bz on the window and s·Aσ^Δ − B >_R 0 (s = sign A)."""
    s = _nonzero_sign(a, pred, horizon)
    return _search(
        "beats_witness", pred, horizon, 0, 1,
        lambda D, z: abs(apply(a, pred, pred.successor(z, D))) > apply(b, pred, z),
        lambda D: a.shift(D).scale(s) - b,
    )


def innocuous_lambda(a1: Operator, sub: SubPredicate,
                     horizon: int = DEFAULT_HORIZON) -> Certified:
    """Least Λ with |A₁σ^Λ r| > 8|A₁σ^d r| for all window r ∈ R."""
    pred = sub.base
    s = _nonzero_sign(a1, pred, horizon)
    d = sub.d
    return _search(
        "innocuous_lambda", pred, horizon, 0, 1,
        lambda L, r: abs(apply(a1, pred, pred.successor(r, L)))
        > 8 * abs(apply(a1, pred, pred.successor(r, d))),
        lambda L: a1.shift(L).scale(s) - a1.shift(d).scale(8 * s),
    )


def lambda_of(op: Operator, d: int) -> int:
    """On d^ℕ the operator is multiplication by Σ a_i d^i."""
    return poly.evaluate(op.coeffs, d)


def limit_ratio(op: Operator, pred: Predicate, budget: int = REFINE_BUDGET):
    """An enclosure (lo, hi) of lim Az/z, or None when θ = ∞ or unknown."""
    prof = pred.profile
    if not prof.has_minpoly:
        return None
    rem = poly.remainder(op.coeffs, prof.minpoly)
    lo, hi = prof.interval
    return poly.interval_eval(rem, lo, hi) if rem else (Fraction(0), Fraction(0))


def parse_ops(items: Iterable) -> OperatorTuple:
    return as_tuple(list(items))
