"""P_Δ and Q_Δ: the 𝐀-largest member below x and the 𝐀-smallest member at or above x."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Optional, Sequence

from .operator import OperatorTuple, apply, as_tuple, dot
from .tuplespace import TupleSpace, TupleSpaceError, certified_space


class HorizonTooSmall(TupleSpaceError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class PQResult:
    tuple: tuple
    value: int
    boundary_case: bool = False

    def to_json(self) -> dict:
        return {"z": [str(v) for v in self.tuple], "value": str(self.value),
                "boundary": self.boundary_case}


def inf_value(ts: TupleSpace, ops) -> Optional[int]:
    """inf 𝐀·R̃ⁿ_Δ, or None when it is −∞."""
    ops = as_tuple(ops)
    t = ts.complete(ops, (), "min")
    return None if t is None else ts.dot_idx(ops, t)


def sup_value(ts: TupleSpace, ops) -> Optional[int]:
    ops = as_tuple(ops)
    t = ts.complete(ops, (), "max")
    return None if t is None else ts.dot_idx(ops, t)


def _last_true(ok, lo: int, hi: Optional[int]) -> int:
    """Largest c in [lo, hi] with ok(c), given ok(lo) and ok monotone decreasing."""
    if hi is None:
        step, prev, c = 1, lo, lo + 1
        while ok(c):
            prev, c = c, c + step
            step *= 2
        lo, hi = prev, c - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _first_true(ok, lo: int, hi: Optional[int]) -> int:
    """Smallest c in [lo, hi] with ok(c), given ok monotone increasing and some c true."""
    if hi is None:
        if ok(lo):
            return lo
        step, prev, c = 1, lo, lo + 1
        while not ok(c):
            prev, c = c, c + step
            step *= 2
        lo, hi = prev + 1, c
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def _p_idx(ts: TupleSpace, ops: OperatorTuple, x: int) -> tuple[tuple, bool]:
    key = ("P", ops, x)
    hit = ts.cache.get(key)
    if hit is not None:
        return hit
    s = ts.signs(ops)
    tmin = ts.complete(ops, (), "min")
    if tmin is not None and ts.dot_idx(ops, tmin) >= x:
        out = (tmin, True)
    else:
        t: list[int] = []
        for i in range(1, ts.n + 1):
            lo = ts.lo(i)
            hi = t[-1] - ts.D if t else None

            def ok(c, t=t):
                return ts.dot_idx(ops, ts.complete(ops, t + [c], "min")) < x

            t.append(_last_true(ok, lo, hi) if s[i - 1] > 0 else _first_true(ok, lo, hi))
        out = (tuple(t), False)
    if len(ts.cache) > 200_000:
        ts.cache.clear()
    ts.cache[key] = out
    return out


def p_delta(ts: TupleSpace, ops, x: int) -> PQResult:
    """Coordinate descent along the twisted-lexicographic order."""
    ops = ts.require(ops)
    t, boundary = _p_idx(ts, ops, int(x))
    z = ts.vals(t)
    return PQResult(z, dot(ops, ts.pred, z), boundary)


def _negated(ts: TupleSpace, ops: OperatorTuple) -> OperatorTuple:
    neg = -ops
    if neg not in ts.certified_for:
        # the order of −𝐀 is the reverse of the order of 𝐀
        ts.certified_for[neg] = ts.certified_for[ops]
    return neg


def q_delta(ts: TupleSpace, ops, x: int) -> PQResult:
    """Q_Δ(x;𝐀) = P_Δ(1 − x; −𝐀)."""
    ops = ts.require(ops)
    neg = _negated(ts, ops)
    t, boundary = _p_idx(ts, neg, 1 - int(x))
    z = ts.vals(t)
    return PQResult(z, dot(ops, ts.pred, z), boundary)


def p1(ts: TupleSpace, ops, x: int) -> int:
    """P^1_Δ(x;𝐀)."""
    ops = ts.require(ops)
    t, _ = _p_idx(ts, ops, int(x))
    return ts.val(t[0])


class WindowOracle:
    """Brute force over every member with z_1 <= r_horizon, sorted by 𝐀·z."""

    def __init__(self, ts: TupleSpace, ops, horizon: int):
        self.ts = ts
        self.ops = as_tuple(ops)
        self.horizon = horizon
        bound = ts.pred.nth(horizon)
        rows = sorted((dot(self.ops, ts.pred, z), z) for z in ts.members(bound))
        if not rows:
            raise HorizonTooSmall("window contains no members")
        for a, b in zip(rows, rows[1:]):
            if a[0] == b[0]:
                raise TupleSpaceError(f"collision {a[0]} = 𝐀·{a[1]} = 𝐀·{b[1]}")
        self.values = [r[0] for r in rows]
        self.tuples = [r[1] for r in rows]
        top = ts.floor_idx(bound)
        self.top = ts.val(top)

    def _checked(self, i: int, boundary: bool) -> PQResult:
        z = self.tuples[i]
        if z[0] >= self.top:
            raise HorizonTooSmall(f"oracle extreme {z} sits on the window edge")
        return PQResult(z, self.values[i], boundary)

    def p(self, x: int) -> PQResult:
        i = bisect.bisect_left(self.values, x) - 1
        if i < 0:
            return self._checked(0, True)
        return self._checked(i, False)

    def q(self, x: int) -> PQResult:
        i = bisect.bisect_left(self.values, x)
        if i >= len(self.values):
            return self._checked(len(self.values) - 1, True)
        return self._checked(i, False)


def window_oracle(ts: TupleSpace, ops, horizon: int) -> WindowOracle:
    key = ("oracle", as_tuple(ops), horizon)
    if key not in ts.cache:
        ts.cache[key] = WindowOracle(ts, ops, horizon)
    return ts.cache[key]


def pq_oracle(ts: TupleSpace, ops, x: int, horizon: int) -> tuple[PQResult, PQResult]:
    """(P_Δ(x), Q_Δ(x)) by brute force on the window z_1 <= r_horizon."""
    o = window_oracle(ts, ops, horizon)
    return o.p(x), o.q(x)


# structural checks

def plemma_i(ts: TupleSpace, ops, x: int) -> bool:
    """x > 𝐀·P(x) ⇔ x > inf, and x <= 𝐀·Q(x) ⇔ x <= sup."""
    ops = as_tuple(ops)
    lo, hi = inf_value(ts, ops), sup_value(ts, ops)
    p, q = p_delta(ts, ops, x), q_delta(ts, ops, x)
    ok_p = (x > p.value) == (lo is None or x > lo)
    ok_q = (x <= q.value) == (hi is None or x <= hi)
    return ok_p and ok_q


def plemma_ii(ts: TupleSpace, ops, x: int) -> Optional[int]:
    """ε ∈ {−1, 0, 1} with Q^1 = σ^{dε} P^1, or None if there is none."""
    ops = as_tuple(ops)
    a, b = p_delta(ts, ops, x).tuple[0], q_delta(ts, ops, x).tuple[0]
    for eps in (0, 1, -1):
        if ts.sub.successor(a, eps) == b:
            return eps
    return None


@dataclass(frozen=True)
class CaseI:
    delta: int


@dataclass(frozen=True)
class CaseII:
    eps: int


class InnocuousViolation(AssertionError):
    pass


def innocuous_case(ts: TupleSpace, ops, lam: int, s: int, t: int, x: int):
    """Which of P^1(x−s) = σ^δ P^1(x−t) or P^1(x−s) = σ^ε P^1(t−s) holds, δ, ε <= Λ."""
    ops = ts.require(ops)
    sg = ts.signs(ops)[0]
    if sg > 0:
        m = inf_value(ts, ops)
        if not (s <= t < x - m):
            raise PreconditionError("need s <= t < x − min 𝐀·R̃ⁿ_Δ")
    else:
        M = sup_value(ts, ops)
        if not (s >= t > x - M):
            raise PreconditionError("need s >= t > x − max 𝐀·R̃ⁿ_Δ")
    pred = ts.pred
    target = p1(ts, ops, x - s)
    a, b = p1(ts, ops, x - t), p1(ts, ops, t - s)
    for k in range(lam + 1):
        if pred.successor(a, k) == target:
            return CaseI(k)
    for k in range(lam + 1):
        if pred.successor(b, k) == target:
            return CaseII(k)
    raise InnocuousViolation(f"no case with exponent <= {lam} for s={s}, t={t}, x={x}")


@dataclass(frozen=True)
class ReductionReport:
    status: str  # "holds", "fails" or "precondition"
    lhs: Optional[tuple] = None
    rhs: Optional[tuple] = None
    detail: str = ""
    identity_holds: Optional[bool] = None

    def __bool__(self):
        return self.status == "holds"


def reduction_preconditions(ts: TupleSpace, ops, a: int) -> Optional[str]:
    ops = as_tuple(ops)
    if ts.n < 2:
        return "needs n >= 2"
    lo = inf_value(ts, ops)
    if lo is not None and not a > lo:
        return "a <= inf 𝐀·R̃ⁿ_Δ"
    z1 = p1(ts, ops, a)
    t = ts.complete(ops, (ts.idx(z1),), "max")
    if t is not None and not a <= ts.dot_idx(ops, t):
        return "a exceeds max{𝐀·z : z_1 = P^1(a)}"
    return None


def reduction_check(ts: TupleSpace, ops, a: int, rest: Optional[TupleSpace] = None
                    ) -> ReductionReport:
    """P_Δ(a − A_1 P^1_Δ(a); 𝐀_{>1}) = P^{>1}_Δ(a; 𝐀)."""
    ops = ts.require(ops)
    why = reduction_preconditions(ts, ops, a)
    if ts.n < 2:
        return ReductionReport("precondition", detail=why)
    tail = ops[1:]
    if rest is None:
        rest = certified_space(ts.sub, ts.n - 1, ts.delta, tail)
    full = p_delta(ts, ops, a)
    lhs = p_delta(rest, tail, a - apply(ops[0], ts.pred, full.tuple[0])).tuple
    rhs = full.tuple[1:]
    if why is not None:
        # the identity is still evaluated, but not claimed
        return ReductionReport("precondition", lhs, rhs, why, lhs == rhs)
    return ReductionReport("holds" if lhs == rhs else "fails", lhs, rhs, "", lhs == rhs)


def pq_json(ts: TupleSpace, ops, x: int) -> dict:
    return {"P": p_delta(ts, ops, x).to_json(), "Q": q_delta(ts, ops, x).to_json()}


def p_component(ts: TupleSpace, ops, i: int, x: int) -> int:
    return p_delta(ts, ops, x).tuple[i - 1]


def q_component(ts: TupleSpace, ops, i: int, x: int) -> int:
    return q_delta(ts, ops, x).tuple[i - 1]


def values_at(ts: TupleSpace, ops, zs: Sequence[tuple]) -> list[int]:
    ops = as_tuple(ops)
    return [dot(ops, ts.pred, z) for z in zs]
