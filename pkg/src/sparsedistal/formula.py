"""A small formula language over (ℤ, <, +, R) with exact window evaluation.

Terms evaluate to Python ints, ±inf (extended members only) or numpy arrays
when a variable is bound to an array of points; formulas evaluate to bools
or boolean arrays. Parameters are always scalars, so array evaluation is a
vectorised sweep over x.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field, fields
from functools import reduce
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import pdelta as pdm
from .operator import Operator, OperatorTuple, apply, as_operator, as_tuple, dot
from .predicate import Predicate, SubPredicate, whole
from .tuplespace import TupleSpace, UNBOUNDED, certified_space, extreme, next_in_order

INF = math.inf
_INT64_SAFE = 2 ** 62


class FormulaError(ValueError):
    pass


class SortError(FormulaError):
    pass


class UnboundedQuantifier(FormulaError):
    pass


# -- terms -------------------------------------------------------------------

class Term:
    def __add__(self, other):
        return Affine.of((1, self), (1, lift(other)))

    def __sub__(self, other):
        return Affine.of((1, self), (-1, lift(other)))

    def __neg__(self):
        return Affine.of((-1, self))

    def __rmul__(self, c: int):
        return Affine.of((c, self))

    def __str__(self):
        return to_sexp(self)


@dataclass(frozen=True)
class Var(Term):
    name: str
    __str__ = Term.__str__


@dataclass(frozen=True)
class Const(Term):
    value: Union[int, float]
    __str__ = Term.__str__


@dataclass(frozen=True)
class Affine(Term):
    """Σ c_i t_i + const."""
    terms: tuple = ()
    const: int = 0
    __str__ = Term.__str__

    @staticmethod
    def of(*pairs, const: int = 0) -> "Affine":
        out: dict = {}
        order = []
        c0 = const
        for c, t in pairs:
            if isinstance(t, Affine):
                for c2, t2 in t.terms:
                    if t2 not in out:
                        order.append(t2)
                    out[t2] = out.get(t2, 0) + c * c2
                c0 += c * t.const
            elif isinstance(t, Const) and not isinstance(t.value, float):
                c0 += c * t.value
            else:
                if t not in out:
                    order.append(t)
                out[t] = out.get(t, 0) + c
        return Affine(tuple((out[t], t) for t in order if out[t]), c0)

    def coeff(self, name: str) -> int:
        return sum(c for c, t in self.terms if t == Var(name))


@dataclass(frozen=True)
class FloorDiv(Term):
    t: Term
    m: int
    __str__ = Term.__str__


@dataclass(frozen=True)
class Sigma(Term):
    """σ^k t within a subpredicate (k counts subpredicate steps, clamped at the minimum)."""
    k: int
    t: Term
    sub: SubPredicate
    __str__ = Term.__str__


@dataclass(frozen=True)
class OpApply(Term):
    op: Operator
    t: Term
    pred: Predicate
    __str__ = Term.__str__


@dataclass(frozen=True, eq=False)
class PDot(Term):
    """𝐁·P_Δ(t;𝐀) (kind "P") or 𝐁·Q_Δ(t;𝐀) (kind "Q") over the space ts."""
    ts: TupleSpace
    A: OperatorTuple
    B: OperatorTuple
    t: Term
    kind: str = "P"
    __str__ = Term.__str__

    def _key(self):
        return ("PDot", id(self.ts), self.A, self.B, self.t, self.kind)

    def __eq__(self, other):
        return isinstance(other, PDot) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def PComp(i: int, ts: TupleSpace, A, t: Term) -> PDot:
    """P^i_Δ(t;𝐀)."""
    A = as_tuple(A)
    return PDot(ts, A, OperatorTuple.standard(i, A.n), t, "P")


def QComp(i: int, ts: TupleSpace, A, t: Term) -> PDot:
    A = as_tuple(A)
    return PDot(ts, A, OperatorTuple.standard(i, A.n), t, "Q")


@dataclass(frozen=True, eq=False)
class ExtremeDot(Term):
    """𝐁·ext_𝐀{z ∈ R̃ⁿ_Δ : z_1 = t} with ext ∈ {min, max}."""
    ts: TupleSpace
    A: OperatorTuple
    B: OperatorTuple
    t: Term
    direction: str = "min"
    __str__ = Term.__str__

    def _key(self):
        return ("Ext", id(self.ts), self.A, self.B, self.t, self.direction)

    def __eq__(self, other):
        return isinstance(other, ExtremeDot) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class DefFn(Term):
    name: str
    arg: Term
    __str__ = Term.__str__


ARG = "_arg"
REGISTRY: dict[str, Term] = {}


def register(name: str, body: Term) -> None:
    """Register a unary definable function; the body uses the variable `_arg`."""
    REGISTRY[name] = body


register("id", Var(ARG))


def lift(x) -> Term:
    if isinstance(x, Term):
        return x
    if isinstance(x, str):
        return Var(x)
    return Const(x)


# -- formulas ----------------------------------------------------------------

class Formula:
    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)

    def __str__(self):
        return to_sexp(self)


@dataclass(frozen=True)
class Top(Formula):
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Bottom(Formula):
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Gt0(Formula):
    t: Term
    __str__ = Formula.__str__


CMP_OPS = ("<", "<=", ">", ">=", "=", "!=")


@dataclass(frozen=True)
class Cmp(Formula):
    op: str
    lhs: Term
    rhs: Term
    __str__ = Formula.__str__

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise FormulaError(f"unknown comparison {self.op}")


def Eq(a, b) -> Cmp:
    return Cmp("=", lift(a), lift(b))


@dataclass(frozen=True)
class Congruence(Formula):
    """t ≡ b (mod m)."""
    t: Term
    b: int
    m: int
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Divides(Formula):
    m: int
    t: Term
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Member(Formula):
    """t ∈ R̃, optionally extended by −∞ ("lo"), +∞ ("hi") or both."""
    t: Term
    sub: SubPredicate
    ext: Optional[str] = None
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Not(Formula):
    f: Formula
    __str__ = Formula.__str__


@dataclass(frozen=True)
class And(Formula):
    items: tuple
    __str__ = Formula.__str__


@dataclass(frozen=True)
class Or(Formula):
    items: tuple
    __str__ = Formula.__str__


@dataclass(frozen=True, eq=False)
class BoundedExists(Formula):
    """∃z ∈ R̃ⁿ_Δ with z_1 <= cap: body, binding z_i to vars[i]."""
    vars: tuple
    ts: TupleSpace
    cap: Term
    body: Formula
    __str__ = Formula.__str__

    def _key(self):
        return ("Ex", self.vars, id(self.ts), self.cap, self.body)

    def __eq__(self, other):
        return isinstance(other, BoundedExists) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def conj(items: Iterable[Formula]) -> Formula:
    items = tuple(f for f in items if not isinstance(f, Top))
    if any(isinstance(f, Bottom) for f in items):
        return Bottom()
    if not items:
        return Top()
    return items[0] if len(items) == 1 else And(items)


def disj(items: Iterable[Formula]) -> Formula:
    items = tuple(f for f in items if not isinstance(f, Bottom))
    if any(isinstance(f, Top) for f in items):
        return Top()
    if not items:
        return Bottom()
    return items[0] if len(items) == 1 else Or(items)


def _cached_hash(self):
    # AST nodes are immutable and hashed constantly as memo keys
    h = self.__dict__.get("_hash")
    if h is None:
        if hasattr(self, "_key"):
            key = self._key()
        else:
            key = (type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self))
        h = hash(key)
        object.__setattr__(self, "_hash", h)
    return h


for _cls in (Var, Const, Affine, FloorDiv, Sigma, OpApply, PDot, ExtremeDot, DefFn, Top, Bottom,
             Gt0, Cmp, Congruence, Divides, Member, Not, And, Or, BoundedExists):
    _cls.__hash__ = _cached_hash


# -- evaluation --------------------------------------------------------------

def _is_arr(v) -> bool:
    return isinstance(v, np.ndarray)


def _bigness(v) -> int:
    if _is_arr(v):
        if v.size == 0:
            return 0
        if v.dtype == object:
            return _INT64_SAFE
        return int(np.abs(v).max())
    if isinstance(v, float):
        return 0
    return abs(v)


def _as_object(v):
    return v.astype(object) if _is_arr(v) and v.dtype != object else v


def _map_unique(fn: Callable[[int], Any], arr: np.ndarray) -> np.ndarray:
    """Apply a scalar function over an array through its distinct values."""
    uniq, inv = np.unique(arr, return_inverse=True)
    out = [fn(int(u)) for u in uniq]
    if any(isinstance(o, bool) for o in out):
        res = np.array(out, dtype=bool)
    elif all(abs(o) < _INT64_SAFE for o in out):
        res = np.array(out, dtype=np.int64)
    else:
        res = np.array(out, dtype=object)
    return res[inv.reshape(arr.shape)]


def _truth(v):
    if _is_arr(v):
        return v.astype(bool)
    return bool(v)


class Evaluator:
    """Evaluates terms and formulas under one environment, memoising subterms."""

    def __init__(self, env: Mapping[str, Any]):
        self.env = dict(env)
        self.memo: dict = {}

    # terms
    def term(self, t: Term):
        key = ("t", t)
        try:
            return self.memo[key]
        except (KeyError, TypeError):
            pass
        v = self._term(t)
        try:
            self.memo[key] = v
        except TypeError:
            pass
        return v

    def _term(self, t: Term):
        if isinstance(t, Var):
            if t.name not in self.env:
                raise SortError(f"unbound variable {t.name}")
            return self.env[t.name]
        if isinstance(t, Const):
            return t.value
        if isinstance(t, Affine):
            return self._affine(t)
        if isinstance(t, FloorDiv):
            v = self.term(t.t)
            if isinstance(v, float):
                return v
            return v // t.m
        if isinstance(t, Sigma):
            v = self.term(t.t)
            return self._pointwise(v, lambda z: t.sub.successor(z, t.k))
        if isinstance(t, OpApply):
            v = self.term(t.t)
            return self._pointwise(v, lambda z: apply(t.op, t.pred, z))
        if isinstance(t, PDot):
            return self._pdot(t)
        if isinstance(t, ExtremeDot):
            v = self.term(t.t)
            return self._pointwise(v, lambda z: _extreme_dot(t, z))
        if isinstance(t, DefFn):
            if t.name not in REGISTRY:
                raise FormulaError(f"unknown definable function {t.name}")
            arg = self.term(t.arg)
            return Evaluator({ARG: arg}).term(REGISTRY[t.name])
        raise FormulaError(f"not a term: {t!r}")

    def _affine(self, t: Affine):
        vals = [(c, self.term(s)) for c, s in t.terms]
        infs = [(c, v) for c, v in vals if isinstance(v, float)]
        if infs:
            signs = {math.copysign(1, c * v) for c, v in infs}
            if len(signs) > 1:
                raise SortError("∞ − ∞ in an affine term")
            return signs.pop() * INF
        bound = abs(t.const) + sum(abs(c) * _bigness(v) for c, v in vals)
        if bound >= _INT64_SAFE:
            vals = [(c, _as_object(v)) for c, v in vals]
        acc = t.const
        for c, v in vals:
            acc = acc + c * v
        return acc

    def _pointwise(self, v, fn):
        if isinstance(v, float):
            raise SortError("an infinite value is not a predicate element")
        if _is_arr(v):
            return _map_unique(fn, v)
        return fn(v)

    def _pdot(self, t: PDot):
        v = self.term(t.t)
        if isinstance(v, float):
            raise SortError("P_Δ of an infinite argument")
        if not _is_arr(v):
            return _pdot_scalar(t, v)
        return _pdot_table(t, v)

    # formulas
    def holds(self, f: Formula):
        key = ("f", f)
        try:
            return self.memo[key]
        except (KeyError, TypeError):
            pass
        v = self._holds(f)
        try:
            self.memo[key] = v
        except TypeError:
            pass
        return v

    def _holds(self, f: Formula):
        if isinstance(f, Top):
            return True
        if isinstance(f, Bottom):
            return False
        if isinstance(f, Gt0):
            return _truth(self.term(f.t) > 0)
        if isinstance(f, Cmp):
            a, b = self.term(f.lhs), self.term(f.rhs)
            if _is_arr(a) or _is_arr(b):
                if _bigness(a) >= _INT64_SAFE or _bigness(b) >= _INT64_SAFE:
                    a, b = _as_object(a), _as_object(b)
            return _truth(_compare(f.op, a, b))
        if isinstance(f, Congruence):
            v = self.term(f.t)
            return _truth((v - f.b) % f.m == 0)
        if isinstance(f, Divides):
            return _truth(self.term(f.t) % f.m == 0)
        if isinstance(f, Member):
            v = self.term(f.t)
            if isinstance(v, float):
                return (v < 0 and f.ext in ("lo", "both")) or (v > 0 and f.ext in ("hi", "both"))
            if _is_arr(v):
                return _map_unique(lambda z: bool(f.sub.contains(z)), v)
            return bool(f.sub.contains(v))
        if isinstance(f, Not):
            v = self.holds(f.f)
            return ~v if _is_arr(v) else not v
        if isinstance(f, And):
            acc = True
            for g in f.items:
                v = self.holds(g)
                acc = acc & v if (_is_arr(acc) or _is_arr(v)) else (acc and v)
                if acc is False or (_is_arr(acc) and not acc.any()):
                    return acc
            return acc
        if isinstance(f, Or):
            acc = False
            for g in f.items:
                v = self.holds(g)
                acc = acc | v if (_is_arr(acc) or _is_arr(v)) else (acc or v)
                if acc is True or (_is_arr(acc) and acc.all()):
                    return acc
            return acc
        if isinstance(f, BoundedExists):
            return self._exists(f)
        raise FormulaError(f"not a formula: {f!r}")

    def _exists(self, f: BoundedExists):
        cap = self.term(f.cap)
        if _is_arr(cap):
            cap = int(cap.max())
        if isinstance(cap, float):
            raise UnboundedQuantifier("∃ over R̃ⁿ_Δ needs a finite z_1 cap")
        if len(f.vars) != f.ts.n:
            raise SortError("quantified tuple arity mismatch")
        acc = False
        for z in f.ts.members(cap):
            sub = Evaluator({**self.env, **dict(zip(f.vars, z))})
            v = sub.holds(f.body)
            acc = acc | v if (_is_arr(acc) or _is_arr(v)) else (acc or v)
            if acc is True or (_is_arr(acc) and acc.all()):
                break
        return acc


def _compare(op: str, a, b):
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "=":
        return a == b
    return a != b


def _extreme_dot(t: ExtremeDot, z1: int) -> int:
    z = extreme(t.ts, t.A, t.direction, z1=z1)
    if z is UNBOUNDED:
        raise SortError("unbounded extreme")
    return dot(t.B, t.ts.pred, z)


def _pdot_scalar(t: PDot, x: int) -> int:
    r = pdm.p_delta(t.ts, t.A, x) if t.kind == "P" else pdm.q_delta(t.ts, t.A, x)
    return dot(t.B, t.ts.pred, r.tuple)


def _pdot_table(t: PDot, xs: np.ndarray) -> np.ndarray:
    """Vectorised P_Δ/Q_Δ: walk the 𝐀-order once across the range of arguments."""
    ts, A = t.ts, t.A
    if xs.size == 0:
        return np.zeros(xs.shape, dtype=np.int64)
    lo, hi = int(xs.min()), int(xs.max())
    if t.kind == "P":
        first = pdm.p_delta(ts, A, lo).tuple
    else:
        first = pdm.q_delta(ts, A, lo).tuple
    tuples = [first]
    values = [dot(A, ts.pred, first)]
    cur = ts.idxs(first)
    # P is constant between consecutive values, Q likewise; enumerate ascending
    while values[-1] < hi:
        try:
            cur = next_in_order(ts, A, cur, ascending=True)
        except Exception:
            break
        z = ts.vals(cur)
        tuples.append(z)
        values.append(dot(A, ts.pred, z))
    outs = [dot(t.B, ts.pred, z) for z in tuples]
    big = any(abs(v) >= _INT64_SAFE for v in values + outs) or _bigness(xs) >= _INT64_SAFE
    vals = np.array(values, dtype=object if big else np.int64)
    keys = _as_object(xs) if big else xs
    if t.kind == "P":
        pos = np.searchsorted(vals, keys, side="left") - 1
        pos = np.clip(pos, 0, len(values) - 1)
    else:
        pos = np.searchsorted(vals, keys, side="left")
        pos = np.clip(pos, 0, len(values) - 1)
    res = np.array(outs, dtype=object if big else np.int64)
    return res[pos]


def evaluate(phi: Formula, env: Mapping[str, Any]):
    """Truth value of φ under env; array-valued variables give a boolean array."""
    return Evaluator(env).holds(phi)


def evaluate_term(t: Term, env: Mapping[str, Any]):
    return Evaluator(env).term(t)


# -- substitution ------------------------------------------------------------

def substitute(node, mapping: Mapping[str, Any]):
    """Replace variables by terms (or constants) throughout a term or formula."""
    m = {k: lift(v) for k, v in mapping.items()}

    def st(t: Term) -> Term:
        if isinstance(t, Var):
            return m.get(t.name, t)
        if isinstance(t, Const):
            return t
        if isinstance(t, Affine):
            return Affine.of(*((c, st(s)) for c, s in t.terms), const=t.const)
        if isinstance(t, FloorDiv):
            return FloorDiv(st(t.t), t.m)
        if isinstance(t, Sigma):
            return Sigma(t.k, st(t.t), t.sub)
        if isinstance(t, OpApply):
            return OpApply(t.op, st(t.t), t.pred)
        if isinstance(t, PDot):
            return PDot(t.ts, t.A, t.B, st(t.t), t.kind)
        if isinstance(t, ExtremeDot):
            return ExtremeDot(t.ts, t.A, t.B, st(t.t), t.direction)
        if isinstance(t, DefFn):
            return DefFn(t.name, st(t.arg))
        raise FormulaError(f"not a term: {t!r}")

    def sf(f: Formula) -> Formula:
        if isinstance(f, (Top, Bottom)):
            return f
        if isinstance(f, Gt0):
            return Gt0(st(f.t))
        if isinstance(f, Cmp):
            return Cmp(f.op, st(f.lhs), st(f.rhs))
        if isinstance(f, Congruence):
            return Congruence(st(f.t), f.b, f.m)
        if isinstance(f, Divides):
            return Divides(f.m, st(f.t))
        if isinstance(f, Member):
            return Member(st(f.t), f.sub, f.ext)
        if isinstance(f, Not):
            return Not(sf(f.f))
        if isinstance(f, And):
            return And(tuple(sf(g) for g in f.items))
        if isinstance(f, Or):
            return Or(tuple(sf(g) for g in f.items))
        if isinstance(f, BoundedExists):
            inner = {k: v for k, v in m.items() if k not in f.vars}
            return BoundedExists(f.vars, f.ts, st(f.cap), substitute(f.body, inner))
        raise FormulaError(f"not a formula: {f!r}")

    return st(node) if isinstance(node, Term) else sf(node)


def free_vars(node) -> set[str]:
    out: set[str] = set()

    def walk(n, bound=frozenset()):
        if isinstance(n, Var):
            if n.name not in bound:
                out.add(n.name)
        elif isinstance(n, BoundedExists):
            walk(n.cap, bound)
            walk(n.body, bound | set(n.vars))
        elif isinstance(n, (Term, Formula)):
            for v in vars(n).values() if hasattr(n, "__dict__") else ():
                walk(v, bound)
        elif isinstance(n, tuple):
            for v in n:
                walk(v, bound)

    walk(node)
    return out


# -- atomic normalisation ----------------------------------------------------

@dataclass(frozen=True)
class Clause:
    """⋀ f_j > 0 ∧ ⋀ x_i ≡ r_i (mod m); variables absent from residues are unconstrained."""
    ineqs: tuple
    modulus: int = 1
    residues: tuple = ()

    def to_formula(self) -> Formula:
        parts = [Gt0(f) for f in self.ineqs]
        parts += [Congruence(Var(v), r, self.modulus) for v, r in self.residues if self.modulus > 1]
        return conj(parts)


def _linear(t: Term) -> Affine:
    if isinstance(t, Var):
        return Affine.of((1, t))
    if isinstance(t, Const):
        if isinstance(t.value, float):
            raise FormulaError("infinite constant in a Presburger atom")
        return Affine((), t.value)
    if isinstance(t, Affine):
        for _, s in t.terms:
            if not isinstance(s, Var):
                raise FormulaError(f"non-affine subterm {s}")
        return t
    raise FormulaError(f"non-affine term {t}")


def _nnf(f: Formula, neg: bool = False) -> Formula:
    """Push negations to atoms; atoms come back as Gt0, Divides or their negations."""
    if isinstance(f, Top):
        return Bottom() if neg else Top()
    if isinstance(f, Bottom):
        return Top() if neg else Bottom()
    if isinstance(f, Not):
        return _nnf(f.f, not neg)
    if isinstance(f, And):
        parts = tuple(_nnf(g, neg) for g in f.items)
        return disj(parts) if neg else conj(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(g, neg) for g in f.items)
        return conj(parts) if neg else disj(parts)
    if isinstance(f, Gt0):
        a = _linear(f.t)
        # (iv) ¬(f > 0) ⇔ −f + 1 > 0
        return Gt0(Affine.of((-1, a), const=1)) if neg else Gt0(a)
    if isinstance(f, Cmp):
        a, b = _linear(f.lhs), _linear(f.rhs)
        d = Affine.of((1, a), (-1, b))  # lhs − rhs
        op = f.op
        if neg:
            op = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}[op]
        if op == ">":
            return Gt0(d)
        if op == ">=":
            return Gt0(Affine.of((1, d), const=1))
        if op == "<":
            return Gt0(Affine.of((-1, d)))
        if op == "<=":
            return Gt0(Affine.of((-1, d), const=1))
        if op == "=":
            # (i) f = 0 ⇔ f + 1 > 0 ∧ −f + 1 > 0
            return And((Gt0(Affine.of((1, d), const=1)), Gt0(Affine.of((-1, d), const=1))))
        # (ii) f ≠ 0 ⇔ f > 0 ∨ −f > 0
        return Or((Gt0(d), Gt0(Affine.of((-1, d)))))
    if isinstance(f, Congruence):
        body = Divides(f.m, Affine.of((1, _linear(f.t)), const=-f.b))
        return Not(body) if neg else body
    if isinstance(f, Divides):
        body = Divides(f.m, _linear(f.t))
        return Not(body) if neg else body
    raise FormulaError(f"not a quantifier-free Presburger formula: {f}")


def _dnf(f: Formula) -> list[list[Formula]]:
    if isinstance(f, Top):
        return [[]]
    if isinstance(f, Bottom):
        return []
    if isinstance(f, Or):
        return [c for g in f.items for c in _dnf(g)]
    if isinstance(f, And):
        out = [[]]
        for g in f.items:
            out = [a + b for a in out for b in _dnf(g)]
        return out
    return [[f]]


def _residue_systems(atom: Divides, negated: bool) -> list[dict]:
    """(v)/(vi): m | f expands into residue assignments of the variables of f."""
    a = atom.t
    m = atom.m
    names = sorted({s.name for c, s in a.terms if c % m})
    out = []
    for rs in itertools.product(range(m), repeat=len(names)):
        env = dict(zip(names, rs))
        val = a.const + sum(c * env.get(s.name, 0) for c, s in a.terms)
        if (val % m == 0) != negated:
            out.append({n: (r, m) for n, r in env.items()})
    return out


def crt(r1: int, m1: int, r2: int, m2: int) -> Optional[tuple[int, int]]:
    """Combine x ≡ r1 (m1) and x ≡ r2 (m2); None when inconsistent."""
    g = math.gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    # solve r1 + m1·k ≡ r2 (mod m2)
    k = ((r2 - r1) // g * pow(m1 // g, -1, m2 // g)) % (m2 // g) if m2 // g > 1 else 0
    return (r1 + m1 * k) % l, l


def normalize_atoms(phi: Formula) -> list[Clause]:
    """A disjunction of (⋀ affine > 0 ∧ per-variable congruences), equivalent to φ."""
    clauses = []
    for lits in _dnf(_nnf(phi)):
        ineqs = []
        systems = [{}]
        for lit in lits:
            if isinstance(lit, Gt0):
                ineqs.append(lit.t)
                continue
            neg = isinstance(lit, Not)
            base = lit.f if neg else lit
            options = _residue_systems(base, neg)
            systems = [{**s, "__pending__": s.get("__pending__", ()) + (o,)}
                       for s in systems for o in options]
        for s in systems:
            merged: dict = {}
            ok = True
            for o in s.get("__pending__", ()):
                for v, (r, m) in o.items():
                    if v in merged:
                        c = crt(*merged[v], r, m)
                        if c is None:
                            ok = False
                            break
                        merged[v] = c
                    else:
                        merged[v] = (r, m)
                if not ok:
                    break
            if not ok:
                continue
            mod = reduce(lambda a, b: a * b // math.gcd(a, b), (m for _, m in merged.values()), 1)
            # lift every residue to the clause's common modulus
            var_opts = []
            for v in sorted(merged):
                r, m = merged[v]
                var_opts.append([(v, r + m * j) for j in range(mod // m)])
            for combo in itertools.product(*var_opts):
                clauses.append(Clause(tuple(ineqs), mod, tuple(c for c in combo if mod > 1)))
    return clauses


def clauses_formula(clauses: Sequence[Clause]) -> Formula:
    return disj(c.to_formula() for c in clauses)


# -- the formula families ------------------------------------------------------

def build_family(kind: str, **p) -> Formula:
    """E0: ⋀ f_j > 0. En: ∃z ∈ R̃ⁿ_0 ⋀ f_j > 𝐀^(j)·z. Fn: Ex − y_2 □ 𝐁·P_Δ(x − y_1;𝐀).
    Gn: T(u,v) ∧ ∃z ∈ R̃ⁿ_Δ (y_1 + 𝐀·z < x < y_2 + 𝐁·z ∧ ⋀ u_i <= z_i <= v_i).
    """
    x = Var(p.get("x", "x"))
    if kind == "E0":
        return conj(Gt0(lift(f)) for f in p["fs"])
    if kind == "En":
        ts: TupleSpace = p["ts"]
        if ts.delta != 0:
            raise FormulaError("(En) quantifies over R̃ⁿ_0")
        zs = tuple(f"z{i + 1}" for i in range(ts.n))
        body = []
        for f, A in zip(p["fs"], p["As"]):
            A = as_tuple(A)
            body.append(Gt0(Affine.of((1, lift(f)), (-1, _dot_term(A, zs, ts.pred)))))
        return BoundedExists(zs, ts, lift(p["cap"]), conj(body))
    if kind == "Fn":
        ts = p["ts"]
        A, B = as_tuple(p["A"]), as_tuple(p["B"])
        E = int(p.get("E", 1))
        box = p.get("box", "<")
        if A.n != B.n or A.n != ts.n:
            raise FormulaError("(Fn) arity mismatch")
        if E not in (0, 1):
            raise FormulaError("(Fn) needs E ∈ {0, 1}")
        if E != 1 and B.standard_index() is None:
            raise FormulaError("(Fn): E = 1 unless 𝐁 = 𝐅ⁱ")
        if not A.nonzero(ts.pred):
            raise FormulaError("(Fn) needs non-zero operators in 𝐀")
        lhs = Affine.of((E, x), (-1, Var(p.get("y2", "y2"))))
        rhs = PDot(ts, A, B, Affine.of((1, x), (-1, Var(p.get("y1", "y1")))))
        return Cmp(box, lhs, rhs)
    if kind == "Gn":
        ts = p["ts"]
        A, B = as_tuple(p["A"]), as_tuple(p["B"])
        n = ts.n
        us = [Var(f"u{i + 1}") for i in range(n)]
        vs = [Var(f"v{i + 1}") for i in range(n)]
        zs = tuple(f"z{i + 1}" for i in range(n))
        guard = conj([Member(u, ts.sub, "lo") for u in us] + [Member(v, ts.sub, "hi") for v in vs])
        y1, y2 = Var("y1"), Var("y2")
        body = [Cmp("<", Affine.of((1, y1), (1, _dot_term(A, zs, ts.pred))), x),
                Cmp("<", x, Affine.of((1, y2), (1, _dot_term(B, zs, ts.pred))))]
        for i in range(n):
            body += [Cmp("<=", us[i], Var(zs[i])), Cmp("<=", Var(zs[i]), vs[i])]
        return guard & BoundedExists(zs, ts, lift(p["cap"]), conj(body))
    raise FormulaError(f"unknown family {kind}")


def _dot_term(A: OperatorTuple, zs: Sequence[str], pred: Predicate) -> Term:
    parts = []
    for a, z in zip(A, zs):
        if a.is_zero:
            continue
        parts.append((1, OpApply(a, Var(z), pred)))
    return Affine.of(*parts)


# -- concrete syntax ------------------------------------------------------------

class Context:
    """Resolves predicate and tuple-space references while parsing."""

    def __init__(self, pred: Predicate):
        self.pred = pred
        self._spaces: dict = {}

    def sub(self, N: int = 0, d: int = 1) -> SubPredicate:
        return SubPredicate(self.pred, N, d) if (N, d) != (0, 1) else whole(self.pred)

    def space(self, n: int, delta: int, ops=None, N: int = 0, d: int = 1) -> TupleSpace:
        key = (n, delta, N, d)
        ts = self._spaces.get(key)
        if ts is None:
            ts = TupleSpace(self.sub(N, d), n, delta)
            self._spaces[key] = ts
        if ops is not None:
            ops = as_tuple(ops)
            if ops not in ts.certified_for:
                ts.certify(ops)
        return ts


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def parse_sexp(text: str):
    """Parse an s-expression into nested lists of strings."""
    stack: list[list] = [[]]
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaError(f"bad s-expression near {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) < 2:
                raise FormulaError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(m.group(3))
    if len(stack) != 1 or len(stack[0]) != 1:
        raise FormulaError("s-expression must contain exactly one form")
    return stack[0][0]


def _atom(x):
    if isinstance(x, str) and re.fullmatch(r"[+-]?\d+", x):
        return int(x)
    return x


def _norm(x):
    if isinstance(x, list):
        return [_norm(y) for y in x]
    return _atom(x)


def _ops(x) -> OperatorTuple:
    x = _norm(x)
    return as_tuple([[o] if isinstance(o, int) else o for o in x])


FORMULA_HEADS = {"gt0", "<", "<=", ">", ">=", "=", "!=", "cong", "div", "in", "not", "and", "or",
                 "true", "false", "exists"}


def from_list(x, ctx: Context):
    """Build a Term or Formula from the nested-list form (JSON or parsed s-expression)."""
    x = _norm(x)
    if isinstance(x, int):
        return Const(x)
    if isinstance(x, str):
        if x in ("inf", "+inf"):
            return Const(INF)
        if x == "-inf":
            return Const(-INF)
        if x in ("true", "false"):
            return Top() if x == "true" else Bottom()
        return Var(x)
    if not x:
        raise FormulaError("empty form")
    head, args = x[0], x[1:]
    T = lambda a: from_list(a, ctx)  # noqa: E731
    if head == "+":
        return Affine.of(*((1, T(a)) for a in args))
    if head == "-":
        if len(args) == 1:
            return Affine.of((-1, T(args[0])))
        return Affine.of((1, T(args[0])), *((-1, T(a)) for a in args[1:]))
    if head == "*":
        return Affine.of((int(args[0]), T(args[1])))
    if head == "aff":
        return Affine.of(*((int(c), T(t)) for c, t in args[0]), const=int(args[1]) if len(args) > 1 else 0)
    if head == "floordiv":
        return FloorDiv(T(args[0]), int(args[1]))
    if head == "sigma":
        N, d = (args[2:4] + [0, 1][len(args[2:4]):]) if len(args) > 2 else (0, 1)
        return Sigma(int(args[0]), T(args[1]), ctx.sub(int(N), int(d)))
    if head == "op":
        return OpApply(as_operator(args[0]), T(args[1]), ctx.pred)
    if head in ("P", "Q"):
        i, delta, ops, t = int(args[0]), int(args[1]), _ops(args[2]), args[3]
        N, d = (int(args[4]), int(args[5])) if len(args) > 5 else (0, 1)
        ts = ctx.space(ops.n, delta, ops, N, d)
        mk = PComp if head == "P" else QComp
        return mk(i, ts, ops, T(t))
    if head in ("PB", "QB"):
        delta, A, B, t = int(args[0]), _ops(args[1]), _ops(args[2]), args[3]
        N, d = (int(args[4]), int(args[5])) if len(args) > 5 else (0, 1)
        ts = ctx.space(A.n, delta, A, N, d)
        return PDot(ts, A, B, T(t), head[0])
    if head in ("extmin", "extmax"):
        delta, A, B, t = int(args[0]), _ops(args[1]), _ops(args[2]), args[3]
        N, d = (int(args[4]), int(args[5])) if len(args) > 5 else (0, 1)
        ts = ctx.space(A.n, delta, A, N, d)
        return ExtremeDot(ts, A, B, T(t), head[3:])
    if head == "fn":
        return DefFn(str(args[0]), T(args[1]))
    if head == "gt0":
        return Gt0(T(args[0]))
    if head in CMP_OPS:
        return Cmp(head, T(args[0]), T(args[1]))
    if head == "cong":
        return Congruence(T(args[0]), int(args[1]), int(args[2]))
    if head == "div":
        return Divides(int(args[0]), T(args[1]))
    if head == "in":
        ext = args[1] if len(args) > 1 and args[1] in ("lo", "hi", "both") else None
        rest = [a for a in args[1:] if a not in ("lo", "hi", "both", None)]
        N, d = (int(rest[0]), int(rest[1])) if len(rest) >= 2 else (0, 1)
        return Member(T(args[0]), ctx.sub(N, d), ext)
    if head == "not":
        return Not(T(args[0]))
    if head == "and":
        return And(tuple(T(a) for a in args))
    if head == "or":
        return Or(tuple(T(a) for a in args))
    if head == "true":
        return Top()
    if head == "false":
        return Bottom()
    if head == "exists":
        names, delta, cap, body = args
        names = tuple(str(v) for v in names)
        ts = ctx.space(len(names), int(delta))
        return BoundedExists(names, ts, T(cap), T(body))
    raise FormulaError(f"unknown head {head!r}")


def parse(text: str, ctx: Context):
    """Parse JSON (a nested list) or an s-expression."""
    s = text.strip()
    if s.startswith("["):
        return from_list(json.loads(s), ctx)
    return from_list(parse_sexp(s), ctx)


def _ops_list(A: OperatorTuple) -> list:
    return [list(a.coeffs) for a in A]


def to_list(node) -> Any:
    """Nested-list form (inverse of from_list up to context)."""
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        v = node.value
        return ("inf" if v > 0 else "-inf") if isinstance(v, float) else v
    if isinstance(node, Affine):
        return ["aff", [[c, to_list(t)] for c, t in node.terms], node.const]
    if isinstance(node, FloorDiv):
        return ["floordiv", to_list(node.t), node.m]
    if isinstance(node, Sigma):
        return ["sigma", node.k, to_list(node.t), node.sub.N, node.sub.d]
    if isinstance(node, OpApply):
        return ["op", list(node.op.coeffs), to_list(node.t)]
    if isinstance(node, PDot):
        return ["PB" if node.kind == "P" else "QB", node.ts.delta, _ops_list(node.A),
                _ops_list(node.B), to_list(node.t), node.ts.sub.N, node.ts.sub.d]
    if isinstance(node, ExtremeDot):
        return ["ext" + node.direction, node.ts.delta, _ops_list(node.A), _ops_list(node.B),
                to_list(node.t), node.ts.sub.N, node.ts.sub.d]
    if isinstance(node, DefFn):
        return ["fn", node.name, to_list(node.arg)]
    if isinstance(node, Top):
        return ["true"]
    if isinstance(node, Bottom):
        return ["false"]
    if isinstance(node, Gt0):
        return ["gt0", to_list(node.t)]
    if isinstance(node, Cmp):
        return [node.op, to_list(node.lhs), to_list(node.rhs)]
    if isinstance(node, Congruence):
        return ["cong", to_list(node.t), node.b, node.m]
    if isinstance(node, Divides):
        return ["div", node.m, to_list(node.t)]
    if isinstance(node, Member):
        out = ["in", to_list(node.t)]
        if node.ext:
            out.append(node.ext)
        return out + [node.sub.N, node.sub.d]
    if isinstance(node, Not):
        return ["not", to_list(node.f)]
    if isinstance(node, And):
        return ["and"] + [to_list(g) for g in node.items]
    if isinstance(node, Or):
        return ["or"] + [to_list(g) for g in node.items]
    if isinstance(node, BoundedExists):
        return ["exists", list(node.vars), node.ts.delta, to_list(node.cap), to_list(node.body)]
    raise FormulaError(f"cannot serialise {node!r}")


def to_sexp(node) -> str:
    def show(x):
        if isinstance(x, list):
            return "(" + " ".join(show(y) for y in x) + ")"
        return str(x)
    return show(to_list(node))


def template(node, keep: Iterable[str] = ("x",)) -> str:
    """The shape of a formula: integer constants and non-kept variables become slots."""
    keep = set(keep)

    def abstract(x):
        if isinstance(x, list):
            if x and x[0] in ("PB", "QB", "extmin", "extmax"):
                return x[:4] + [abstract(x[4])] + x[5:]
            if x and x[0] in ("sigma", "floordiv", "cong", "div", "op", "in"):
                return [x[0]] + [abstract(y) if isinstance(y, list) or (isinstance(y, str)
                                 and y not in ("lo", "hi", "both")) else y for y in x[1:]]
            if x and x[0] == "aff":
                return ["aff", [[c, abstract(t)] for c, t in x[1]], "_"]
            return [abstract(y) for y in x]
        if isinstance(x, int):
            return "_"
        if isinstance(x, str) and x not in keep and not x.startswith("_") and x not in (
                "inf", "-inf", "lo", "hi", "both"):
            return "_" if re.fullmatch(r"[a-z]+\d*(#\d+)?", x) else x
        return x

    def show(x):
        if isinstance(x, list):
            return "(" + " ".join(show(y) for y in x) + ")"
        return str(x)

    return show(abstract(to_list(node)))
