"""Gapped tuple spaces R̃ⁿ_Δ and the order induced on them by an operator tuple.

Members are handled internally by their sub-indices: z_i = R̃[t_i].  With
D = Δ/d the gap condition z_i >= σ^Δ z_{i+1} reads t_i >= t_{i+1} + D.  The
gaps apply between consecutive coordinates only; the last coordinate ranges
over all of R̃.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from . import poly
from .operator import (
    Certified,
    apply,
    OperatorTuple,
    Sign,
    as_tuple,
    dot,
    sign_classify,
)
from .predicate import INFINITY, PredicateError, SubPredicate

DEFAULT_HORIZON = 40
DELTA_LIMIT = 256


class TupleSpaceError(ValueError):
    pass


class UncertifiedDelta(TupleSpaceError):
    pass


class EmptySpace(TupleSpaceError):
    pass


class Order(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class _Unbounded:
    def __repr__(self):
        return "Unbounded"

    def __bool__(self):
        return False


UNBOUNDED = _Unbounded()


class TupleSpace:
    def __init__(self, sub: SubPredicate, n: int, delta: int):
        if n < 1:
            raise TupleSpaceError("arity must be >= 1")
        if delta < 0 or delta % sub.d:
            raise TupleSpaceError(f"Δ={delta} must be a non-negative multiple of d={sub.d}")
        self.sub = sub
        self.n = n
        self.delta = delta
        self.D = delta // sub.d
        self.certified_for: dict[OperatorTuple, Certified] = {}
        self._signs: dict[OperatorTuple, tuple[int, ...]] = {}
        self.cache: dict = {}

    def __repr__(self):
        return f"TupleSpace({self.sub.base.name}, N={self.sub.N}, d={self.sub.d}, n={self.n}, Δ={self.delta})"

    @property
    def pred(self):
        return self.sub.base

    # index <-> value
    def val(self, t: int) -> int:
        return self.sub.nth(t)

    def vals(self, ts: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.sub.nth(t) for t in ts)

    def idx(self, z: int) -> int:
        return self.sub.sub_index(z)

    def idxs(self, z: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.sub.sub_index(v) for v in z)

    def floor_idx(self, x) -> int:
        """Largest t with R̃[t] <= x (−1 if none); x may be ±inf."""
        if x == math.inf:
            raise TupleSpaceError("no finite floor index for +inf")
        if x == -math.inf:
            return -1
        i = self.pred.floor_index(int(x))
        if i < self.sub.N:
            return -1
        return (i - self.sub.N) // self.sub.d

    def ceil_idx(self, x) -> int:
        """Least t with R̃[t] >= x; x may be −inf."""
        if x == -math.inf:
            return 0
        t = self.floor_idx(x)
        if t >= 0 and self.val(t) == x:
            return t
        return t + 1

    def lo(self, i: int) -> int:
        """Least sub-index of coordinate i (1-based) in an unconstrained member."""
        return (self.n - i) * self.D

    def min_lex(self) -> tuple[int, ...]:
        """(σ^{(n-1)Δ} min R̃, ..., σ^Δ min R̃, min R̃)."""
        return self.vals([self.lo(i) for i in range(1, self.n + 1)])

    def contains(self, z: Sequence[int]) -> bool:
        if len(z) != self.n:
            return False
        if not all(self.sub.contains(v) for v in z):
            return False
        t = self.idxs(z)
        return all(t[i] >= t[i + 1] + self.D for i in range(self.n - 1))

    def contains_idx(self, t: Sequence[int]) -> bool:
        return (len(t) == self.n and t[-1] >= 0
                and all(t[i] >= t[i + 1] + self.D for i in range(self.n - 1)))

    def members_idx(self, z1_bound: int) -> Iterator[tuple[int, ...]]:
        """All members with z_1 <= z1_bound, as sub-index tuples."""
        top = self.floor_idx(z1_bound)
        n, D = self.n, self.D

        def rec(prefix, i, hi):
            lo = (n - i) * D
            for t in range(lo, hi + 1):
                if i == n:
                    yield prefix + (t,)
                else:
                    yield from rec(prefix + (t,), i + 1, t - D)

        if top >= self.lo(1):
            yield from rec((), 1, top)

    def members(self, z1_bound: int) -> Iterator[tuple[int, ...]]:
        for t in self.members_idx(z1_bound):
            yield self.vals(t)

    # signs and certification
    def signs(self, ops) -> tuple[int, ...]:
        ops = as_tuple(ops)
        if ops not in self._signs:
            if ops.n != self.n:
                raise TupleSpaceError(f"operator tuple arity {ops.n} != {self.n}")
            s = tuple(sign_classify(a, self.pred).s for a in ops)
            self._signs[ops] = s
        return self._signs[ops]

    def certify(self, ops, horizon: int = DEFAULT_HORIZON, certificate: str = "limit") -> Certified:
        ops = as_tuple(ops)
        if ops in self.certified_for:
            return self.certified_for[ops]
        ok, mode = verify_delta(ops, self.sub, self.n, self.delta, horizon, certificate)
        if not ok:
            raise UncertifiedDelta(f"Δ={self.delta} is not certified for {ops.to_json()}")
        c = Certified(self.delta, mode, horizon)
        self.certified_for[ops] = c
        return c

    def require(self, ops) -> OperatorTuple:
        ops = as_tuple(ops)
        if ops not in self.certified_for:
            raise UncertifiedDelta(f"Δ={self.delta} has not been certified for {ops.to_json()}")
        return ops

    def dot_idx(self, ops: OperatorTuple, t: Sequence[int]) -> int:
        return dot(ops, self.pred, self.vals(t))

    # greedy extremes over a prefix (valid once Δ is certified)
    def complete(self, ops: OperatorTuple, prefix: Sequence[int], want: str,
                 lower: Optional[Sequence[int]] = None, upper: Optional[Sequence[int]] = None):
        """Extend ``prefix`` greedily to the 𝐀-min (want='min') or 𝐀-max member.

        ``lower``/``upper`` are per-coordinate sub-index bounds (already made
        feasible by ``_envelope``).  Returns None when the extreme is unbounded.
        """
        s = self.signs(ops)
        t = list(prefix)
        for i in range(len(t) + 1, self.n + 1):
            lo = self.lo(i) if lower is None else lower[i - 1]
            hi = (t[-1] - self.D) if t else None
            if upper is not None and upper[i - 1] is not None:
                hi = upper[i - 1] if hi is None else min(hi, upper[i - 1])
            small_first = (s[i - 1] > 0) == (want == "min")
            if small_first:
                t.append(lo)
            else:
                if hi is None:
                    return None
                t.append(hi)
        return tuple(t)

    def _envelope(self, box_lo, box_hi, z1):
        """Per-coordinate feasible sub-index bounds, or None if the box is empty.

        A None entry in either box means that side is unconstrained.
        """
        n, D = self.n, self.D
        L = [self.lo(i) for i in range(1, n + 1)]
        U: list[Optional[int]] = [None] * n
        if box_lo is not None:
            L = [L[i] if box_lo[i] is None else max(L[i], self.ceil_idx(box_lo[i]))
                 for i in range(n)]
        if box_hi is not None:
            U = [None if box_hi[i] in (None, math.inf) else self.floor_idx(box_hi[i])
                 for i in range(n)]
        if z1 is not None:
            if not self.sub.contains(z1):
                return None
            t1 = self.idx(z1)
            L[0] = max(L[0], t1)
            U[0] = t1 if U[0] is None else min(U[0], t1)
        # lower envelope from the back, upper envelope from the front
        for i in range(n - 2, -1, -1):
            L[i] = max(L[i], L[i + 1] + D)
        for i in range(1, n):
            if U[i - 1] is not None:
                cap = U[i - 1] - D
                U[i] = cap if U[i] is None else min(U[i], cap)
        for i in range(n):
            if U[i] is not None and U[i] < L[i]:
                return None
        return L, U


def verify_delta(ops, sub: SubPredicate, n: int, delta: int,
                 horizon: int = DEFAULT_HORIZON, certificate: str = "limit") -> tuple[bool, str]:
    """Window check of the first-differing-coordinate rule plus an asymptotic certificate."""
    ops = as_tuple(ops)
    ts = TupleSpace(sub, n, delta)
    s = ts.signs(ops)
    if 0 in s:
        raise TupleSpaceError("operator tuple contains a zero operator")
    if not window_order_ok(ts, ops, horizon):
        return False, "window"
    if n == 1:
        return True, "exact" if sub.base.profile.exact else "heuristic"
    if certificate == "domination":
        return domination_certificate(ops, sub, n, delta, horizon), "exact"
    cert = limit_certificate(ops, sub, n, delta)
    if cert is None:
        return True, "heuristic"
    return cert, "exact"


def window_order_ok(ts: TupleSpace, ops: OperatorTuple, horizon: int) -> bool:
    """Sorting the window by the twisted-lexicographic key must sort 𝐀·z strictly."""
    s = ts.signs(ops)
    bound = ts.pred.nth(horizon)
    rows = [(tuple(si * ti for si, ti in zip(s, t)), ts.dot_idx(ops, t))
            for t in ts.members_idx(bound)]
    rows.sort()
    return all(a[1] < b[1] for a, b in zip(rows, rows[1:]))


def _imul(a, b):
    c = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(c), max(c)


def _iadd(a, b):
    return a[0] + b[0], a[1] + b[1]


def limit_certificate(ops: OperatorTuple, sub: SubPredicate, n: int, delta: int,
                      budget: int = 256) -> Optional[bool]:
    """Asymptotic form of the sign rule: at every level the σ^d-step of z_e beats the tail.

    With θ finite, write m_e/M_e for the limits of (min/max of A_e z_e + tail)/z_e;
    the rule needs θ^d m_e > M_e when A_e > 0 and θ^d M_e < m_e when A_e < 0.
    With θ = ∞ it suffices that every later coordinate has smaller σ-order than
    the step of A_e.  Returns None when the profile gives no information.
    """
    pred = sub.base
    prof = pred.profile
    signs = [sign_classify(a, pred).s for a in ops]
    d = sub.d
    if prof.kind == INFINITY:
        degs = [a.degree for a in ops]
        for e in range(n - 1):
            for j in range(e + 1, n):
                if degs[j] - (j - e) * delta >= degs[e] + d:
                    return False
        return True
    if not prof.has_minpoly:
        return None
    f = prof.minpoly
    rems = [poly.remainder(a.coeffs, f) for a in ops]
    lo, hi = prof.interval
    for _ in range(budget + 1):
        verdict = _limit_levels(rems, signs, lo, hi, delta, d)
        if verdict is not None:
            return verdict
        if lo == hi:
            return False
        lo, hi = poly.refine_root(f, lo, hi)
    return False


def _limit_levels(rems, signs, lo, hi, delta, d) -> Optional[bool]:
    n = len(rems)
    g = (Fraction(1) / hi ** delta, Fraction(1) / lo ** delta)
    step = (lo ** d, hi ** d)
    undecided = False
    m_next = M_next = None
    for e in range(n - 1, -1, -1):
        a = poly.interval_eval(rems[e], lo, hi) if rems[e] else (Fraction(0), Fraction(0))
        if m_next is None:
            m, M = a, a
        else:
            tm = _imul(g, m_next)
            tM = _imul(g, M_next)
            m = _iadd(a, (min(0, tm[0]), min(0, tm[1])))
            M = _iadd(a, (max(0, tM[0]), max(0, tM[1])))
        if e < n - 1:
            if signs[e] > 0:
                left, right = _imul(step, m), M
                if left[0] > right[1]:
                    pass
                elif left[1] <= right[0]:
                    return False
                else:
                    undecided = True
            else:
                left, right = _imul(step, M), m
                if left[1] < right[0]:
                    pass
                elif left[0] >= right[1]:
                    return False
                else:
                    undecided = True
        m_next, M_next = m, M
    return None if undecided else True


def domination_certificate(ops: OperatorTuple, sub: SubPredicate, n: int, delta: int,
                           horizon: int = DEFAULT_HORIZON) -> bool:
    """(n−1)·U·q^{−(Δ−K)} < L/2 with ε = 1/2 (a sufficient, much cruder test)."""
    pred = sub.base
    q, m0 = pred.tail_ratio_bound(horizon)
    U = max(a.abs_sum() for a in ops.ops[1:])
    K = max(a.degree for a in ops)
    window = pred.prefix(horizon + 1)[m0:horizon + 1 - K - 1] or pred.prefix(horizon + 1)[-1:]
    L = min(Fraction(abs(apply(ops[0], pred, z)), z) for z in window)
    if L <= 0:
        return False
    return (n - 1) * U * q ** (-(delta - K)) < L / 2


def sufficient_delta(ops, sub: SubPredicate, n: int, horizon: int = DEFAULT_HORIZON,
                     certificate: str = "limit") -> Certified:
    """Least Δ in dℕ passing the window rule and the asymptotic certificate."""
    ops = as_tuple(ops)
    if n == 1:
        ok, mode = verify_delta(ops, sub, 1, 0, horizon, certificate)
        if ok:
            return Certified(0, mode, horizon)
    for delta in range(0, DELTA_LIMIT, sub.d):
        ok, mode = verify_delta(ops, sub, n, delta, horizon, certificate)
        if ok:
            return Certified(delta, mode, horizon)
    raise TupleSpaceError(f"no certified Δ below {DELTA_LIMIT}")


def find_collision(ops, sub: SubPredicate, n: int, delta: int, z1_bound: int):
    """A pair of distinct members with equal 𝐀·z and z_1 <= z1_bound, or None."""
    ops = as_tuple(ops)
    ts = TupleSpace(sub, n, delta)
    seen: dict[int, tuple] = {}
    for z in ts.members(z1_bound):
        v = dot(ops, ts.pred, z)
        if v in seen:
            return seen[v], z, v
        seen[v] = z
    return None


def count_collisions(ops, sub: SubPredicate, n: int, delta: int, z1_bound: int) -> int:
    ops = as_tuple(ops)
    ts = TupleSpace(sub, n, delta)
    vals = [dot(ops, ts.pred, z) for z in ts.members(z1_bound)]
    return len(vals) - len(set(vals))


def compare(ts: TupleSpace, ops, z: Sequence[int], w: Sequence[int],
            fallback: bool = False) -> Order:
    """Order of 𝐀·z against 𝐀·w by the first differing coordinate."""
    ops = as_tuple(ops)
    if ops not in ts.certified_for:
        if not fallback:
            raise UncertifiedDelta("compare needs a certified Δ (or fallback=True)")
        a, b = dot(ops, ts.pred, z), dot(ops, ts.pred, w)
        return Order.LESS if a < b else Order.GREATER if a > b else Order.EQUAL
    s = ts.signs(ops)
    for si, zi, wi in zip(s, z, w):
        if zi != wi:
            bigger = zi > wi if si > 0 else zi < wi
            return Order.GREATER if bigger else Order.LESS
    return Order.EQUAL


def extreme(ts: TupleSpace, ops, direction: str = "min", box_lo=None, box_hi=None,
            z1: Optional[int] = None):
    """The 𝐀-min/max member subject to u <= z <= v and/or a fixed z_1.

    Returns a value tuple or UNBOUNDED; raises EmptySpace for an empty box.
    """
    ops = ts.require(ops)
    env = ts._envelope(box_lo, box_hi, z1)
    if env is None:
        raise EmptySpace("constrained tuple space is empty")
    L, U = env
    t = ts.complete(ops, (), direction, L, U)
    if t is None:
        return UNBOUNDED
    return ts.vals(t)


def extreme_value(ts: TupleSpace, ops, direction: str = "min", **kw):
    z = extreme(ts, ops, direction, **kw)
    return z if z is UNBOUNDED else dot(as_tuple(ops), ts.pred, z)


def next_in_order(ts: TupleSpace, ops: OperatorTuple, t: Sequence[int],
                  ascending: bool = True) -> tuple[int, ...]:
    """The neighbour of t in the 𝐀-order (next larger value if ascending)."""
    s = ts.signs(ops)
    n, D = ts.n, ts.D
    t = list(t)
    for i in range(n - 1, -1, -1):
        want_up = (s[i] > 0) == ascending
        lo = ts.lo(i + 1)
        hi = t[i - 1] - D if i > 0 else None
        cand = t[i] + 1 if want_up else t[i] - 1
        if cand < lo or (hi is not None and cand > hi):
            continue
        prefix = t[:i] + [cand]
        rest = ts.complete(ops, prefix, "min" if ascending else "max")
        if rest is not None:
            return rest
    raise TupleSpaceError("no neighbour in the requested direction")


def enumerate_in_order(ts: TupleSpace, ops, count: int) -> Iterator[tuple[tuple, int]]:
    """The first ``count`` members ascending (if A_1 > 0) or descending (if A_1 < 0)."""
    ops = ts.require(ops)
    s = ts.signs(ops)
    ascending = s[0] > 0
    t = ts.complete(ops, (), "min" if ascending else "max")
    if t is None:
        raise TupleSpaceError("neither inf nor sup exists")
    for _ in range(count):
        z = ts.vals(t)
        yield z, dot(ops, ts.pred, z)
        t = next_in_order(ts, ops, t, ascending)


def certified_space(sub: SubPredicate, n: int, delta: int, *op_tuples,
                    horizon: int = DEFAULT_HORIZON) -> TupleSpace:
    ts = TupleSpace(sub, n, delta)
    for ops in op_tuples:
        ts.certify(ops, horizon)
    return ts
