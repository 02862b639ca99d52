"""Sparse predicates R ⊆ ℕ as lazily materialised increasing sequences."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence

from . import poly


class PredicateError(ValueError):
    pass


class NotAMember(PredicateError):
    pass


class PredicateExhausted(IndexError):
    """Requested index lies beyond the end of a finite predicate."""


# growth profile kinds
RATIONAL = "rational"
ALGEBRAIC = "algebraic"
INFINITY = "infinity"
EMPIRICAL = "empirical"


@dataclass(frozen=True)
class GrowthProfile:
    """What is known about θ = lim r_{n+1}/r_n.

    Rational and algebraic profiles carry an exact minimal polynomial (a
    rational θ = p/q has minimal polynomial q·x − p) and an isolating interval
    [lo, hi] with lo > 1.
    """

    kind: str
    minpoly: tuple[int, ...] = ()
    interval: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))

    @classmethod
    def rational(cls, p: int, q: int = 1) -> "GrowthProfile":
        theta = Fraction(p, q)
        if theta <= 1:
            raise PredicateError("rational growth ratio must exceed 1")
        return cls(RATIONAL, (-theta.numerator, theta.denominator), (theta, theta))

    @classmethod
    def algebraic(cls, minpoly: Sequence[int], interval: Sequence) -> "GrowthProfile":
        f = poly.strip(tuple(int(c) for c in minpoly))
        lo, hi = (Fraction(interval[0]), Fraction(interval[1]))
        _check_minpoly(f, lo, hi)
        return cls(ALGEBRAIC, f, (lo, hi))

    @classmethod
    def infinity(cls) -> "GrowthProfile":
        return cls(INFINITY)

    @classmethod
    def empirical(cls) -> "GrowthProfile":
        return cls(EMPIRICAL)

    @property
    def exact(self) -> bool:
        return self.kind != EMPIRICAL

    @property
    def has_minpoly(self) -> bool:
        return self.kind in (RATIONAL, ALGEBRAIC)

    def to_json(self) -> dict:
        if self.kind == RATIONAL:
            t = self.interval[0]
            return {"theta": "rational", "p": str(t.numerator), "q": str(t.denominator)}
        if self.kind == ALGEBRAIC:
            return {
                "theta": "algebraic",
                "minpoly": [str(c) for c in self.minpoly],
                "interval": [str(self.interval[0]), str(self.interval[1])],
            }
        if self.kind == INFINITY:
            return {"theta": "infinity"}
        return {"theta": "empirical"}


def _check_minpoly(f: tuple[int, ...], lo: Fraction, hi: Fraction) -> None:
    if len(f) < 2:
        raise PredicateError("minimal polynomial must have degree >= 1")
    if math.gcd(*f) != 1:
        raise PredicateError("minimal polynomial must be content-free")
    if not (1 < lo <= hi):
        raise PredicateError("isolating interval must satisfy 1 < lo <= hi")
    if poly.count_roots(f, lo, hi) != 1:
        raise PredicateError("isolating interval must contain exactly one root")
    if len(f) <= 4 and len(f) > 2 and poly.rational_roots(f):
        # degree 2 or 3 with a rational root is reducible
        raise PredicateError("minimal polynomial is reducible over Q")


class Predicate:
    """An increasing sequence r_0 < r_1 < ... with an append-only cache.

    ``source`` yields the terms in order; it is consumed lazily.  Finite
    predicates simply stop yielding.
    """

    def __init__(
        self,
        source: Callable[[], Iterator[int]],
        name: str,
        profile: Optional[GrowthProfile] = None,
        spec: Optional[dict] = None,
    ):
        self.name = name
        self.profile = profile or GrowthProfile.empirical()
        self.spec = spec or {"kind": name}
        self._source = source()
        self._terms: list[int] = []
        self._index: dict[int, int] = {}
        self._exhausted = False

    def __repr__(self) -> str:
        return f"Predicate({self.name})"

    # cache management
    def _pull(self) -> bool:
        if self._exhausted:
            return False
        try:
            v = next(self._source)
        except StopIteration:
            self._exhausted = True
            return False
        v = int(v)
        if v < 0:
            raise PredicateError(f"{self.name}: negative term {v}")
        if self._terms and v <= self._terms[-1]:
            raise PredicateError(
                f"{self.name}: not strictly increasing at index {len(self._terms)}"
            )
        self._index[v] = len(self._terms)
        self._terms.append(v)
        return True

    def extend_to(self, n: int) -> bool:
        """Materialise r_0..r_n.  Returns False if the predicate ends first."""
        while len(self._terms) <= n:
            if not self._pull():
                return False
        return True

    def extend_past(self, value: int) -> None:
        """Materialise every term <= value (and one more, when it exists)."""
        while not self._terms or self._terms[-1] <= value:
            if not self._pull():
                return

    @property
    def finite(self) -> bool:
        return self._exhausted

    def length(self) -> Optional[int]:
        """Number of terms if the predicate has been seen to be finite."""
        return len(self._terms) if self._exhausted else None

    @property
    def materialized(self) -> int:
        return len(self._terms)

    def nth(self, n: int) -> int:
        if n < 0:
            raise IndexError("index must be non-negative")
        if not self.extend_to(n):
            raise PredicateExhausted(f"{self.name} has only {len(self._terms)} terms")
        return self._terms[n]

    def prefix(self, n: int) -> list[int]:
        """r_0..r_{n-1} (fewer for a short finite predicate)."""
        self.extend_to(n - 1)
        return self._terms[:n]

    @property
    def min_element(self) -> int:
        return self.nth(0)

    def index_of(self, z: int) -> int:
        self.extend_past(z)
        try:
            return self._index[z]
        except (KeyError, TypeError):
            raise NotAMember(f"{z!r} is not in {self.name}") from None

    def contains(self, z) -> bool:
        if not isinstance(z, int) or z < 0:
            return False
        self.extend_past(z)
        return z in self._index

    def floor_index(self, x: int) -> int:
        """Largest i with r_i <= x, or -1."""
        self.extend_past(x)
        return bisect.bisect_right(self._terms, x) - 1

    def terms_upto(self, bound: int) -> list[int]:
        self.extend_past(bound)
        return self._terms[: bisect.bisect_right(self._terms, bound)]

    def successor(self, z: int, k: int = 1) -> int:
        """σ^k z, with σ^{-1}(min R) := min R."""
        i = self.index_of(z)
        return self.nth(max(i + k, 0))

    def tail_ratio_bound(self, horizon: int) -> tuple[Fraction, int]:
        """A rational q > 1 and the least m0 with r_{m+1}/r_m >= q on [m0, horizon)."""
        self.extend_to(horizon)
        h = min(horizon, len(self._terms) - 1)
        ratios = [Fraction(self._terms[m + 1], self._terms[m]) if self._terms[m] else None
                  for m in range(h)]
        prof = self.profile
        if prof.has_minpoly:
            q = (1 + prof.interval[0]) / 2
        elif prof.kind == INFINITY:
            q = Fraction(2)
        else:
            tail = [r for r in ratios[h // 2:] if r is not None] or [Fraction(1)]
            q = min(tail)
        m0 = h
        while m0 > 0 and ratios[m0 - 1] is not None and ratios[m0 - 1] >= q:
            m0 -= 1
        return q, m0


@dataclass(frozen=True)
class SubPredicate:
    """R̃ = {r_{N+dt} : t ∈ ℕ} for a base predicate R."""

    base: Predicate
    N: int = 0
    d: int = 1

    def __post_init__(self):
        if self.N < 0 or self.d < 1:
            raise PredicateError("need N >= 0 and d >= 1")

    def __hash__(self):
        return hash((id(self.base), self.N, self.d))

    def __eq__(self, other):
        return (isinstance(other, SubPredicate) and other.base is self.base
                and other.N == self.N and other.d == self.d)

    def base_index(self, t: int) -> int:
        return self.N + self.d * t

    def nth(self, t: int) -> int:
        return self.base.nth(self.base_index(t))

    @property
    def min_element(self) -> int:
        return self.base.nth(self.N)

    def sub_index(self, z: int) -> int:
        i = self.base.index_of(z)
        if i < self.N or (i - self.N) % self.d:
            raise NotAMember(f"{z!r} is not in the subpredicate")
        return (i - self.N) // self.d

    def contains(self, z) -> bool:
        if not self.base.contains(z):
            return False
        i = self.base.index_of(z)
        return i >= self.N and (i - self.N) % self.d == 0

    def successor(self, z: int, k: int = 1) -> int:
        """The subpredicate's own σ^k (k steps of σ^d), clamped at min R̃."""
        return self.nth(max(self.sub_index(z) + k, 0))

    def terms_upto(self, bound: int) -> list[int]:
        out = []
        t = 0
        while True:
            try:
                v = self.nth(t)
            except PredicateExhausted:
                break
            if v > bound:
                break
            out.append(v)
            t += 1
        return out


def whole(pred: Predicate) -> SubPredicate:
    return SubPredicate(pred, 0, 1)


# built-in generators

def power(d: int) -> Predicate:
    if d < 2:
        raise PredicateError("power base must be >= 2")

    def gen():
        v = 1
        while True:
            yield v
            v *= d

    return Predicate(gen, f"{d}^N", GrowthProfile.rational(d), {"kind": "power", "base": d})


def fibonacci() -> Predicate:
    """The Fibonacci numbers as a set: 1, 2, 3, 5, 8, ... (the repeated 1 dropped)."""

    def gen():
        a, b = 1, 2
        while True:
            yield a
            a, b = b, a + b

    prof = GrowthProfile.algebraic((-1, -1, 1), (Fraction(3, 2), Fraction(2)))
    return Predicate(gen, "fibonacci", prof, {"kind": "fibonacci"})


def factorial() -> Predicate:
    """The set of factorials {1, 2, 6, 24, ...}; r_n = (n+1)!."""

    def gen():
        v, k = 1, 1
        while True:
            yield v
            k += 1
            v *= k

    return Predicate(gen, "factorial", GrowthProfile.infinity(), {"kind": "factorial"})


def recurrence(coeffs: Sequence[int], init: Sequence[int],
               profile: Optional[GrowthProfile] = None) -> Predicate:
    """r_n = c_1 r_{n-1} + ... + c_k r_{n-k} with r_0..r_{k-1} given."""
    cs = [int(c) for c in coeffs]
    if len(init) != len(cs) or not cs:
        raise PredicateError("need exactly k initial terms for k coefficients")

    def gen():
        window = [int(v) for v in init]
        yield from window
        while True:
            v = sum(c * window[-1 - i] for i, c in enumerate(cs))
            yield v
            window = window[1:] + [v]

    spec = {"kind": "recurrence", "coeffs": list(cs), "init": [int(v) for v in init]}
    return Predicate(gen, "recurrence", profile, spec)


def explicit(terms: Sequence[int], profile: Optional[GrowthProfile] = None,
             name: str = "explicit") -> Predicate:
    ts = [int(v) for v in terms]
    return Predicate(lambda: iter(ts), name, profile, {"kind": "explicit", "terms": ts})


# window checks

@dataclass(frozen=True)
class NotFound:
    horizon: int


def congruence_period(pred: Predicate, m: int, horizon: int = 50):
    """Least (N, d), ordered by d then N, with r_{n+d} ≡ r_n (mod m) for N <= n <= horizon-d.

    Verified up to ``horizon`` only.  A candidate must cover two full periods
    and start no later than horizon // 2.
    """
    if m < 1:
        raise PredicateError("modulus must be >= 1")
    pred.extend_to(horizon)
    res = [r % m for r in pred.prefix(horizon + 1)]
    h = len(res) - 1
    for d in range(1, h // 2 + 1):
        # bad[n] is True when r_{n+d} and r_n disagree
        last_bad = -1
        for n in range(h - d + 1):
            if res[n + d] != res[n]:
                last_bad = n
        N = last_bad + 1
        if N <= h // 2 and h - N + 1 >= 2 * d:
            return N, d
    return NotFound(horizon)


@dataclass
class RegularityReport:
    horizon: int
    ratios: list = field(default_factory=list)
    minpoly: Optional[tuple] = None
    annihilated: Optional[bool] = None
    witness: Optional[int] = None
    witness_value: Optional[int] = None
    verdict: str = "inconclusive"

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "ratio_tail": [str(r) for r in self.ratios[-5:]],
            "minpoly": None if self.minpoly is None else [str(c) for c in self.minpoly],
            "annihilated": self.annihilated,
            "witness": self.witness,
            "witness_value": None if self.witness_value is None else str(self.witness_value),
            "verdict": self.verdict,
        }


def check_regular_window(pred: Predicate, horizon: int = 50,
                         minpoly: Optional[Sequence[int]] = None) -> RegularityReport:
    """Window evidence for regularity; ``minpoly`` overrides the profile's polynomial."""
    terms = pred.prefix(horizon + 1)
    rep = RegularityReport(horizon)
    rep.ratios = [Fraction(terms[i + 1], terms[i]) for i in range(len(terms) - 1) if terms[i]]
    f = tuple(minpoly) if minpoly is not None else (
        pred.profile.minpoly if pred.profile.has_minpoly else None)
    if f is not None:
        rep.minpoly = f
        k = len(f) - 1
        for n in range(len(terms) - k):
            v = sum(a * terms[n + i] for i, a in enumerate(f))
            if v != 0:
                rep.annihilated, rep.witness, rep.witness_value = False, n, v
                rep.verdict = "refuted"
                return rep
        rep.annihilated = True
        rep.verdict = "consistent"
    elif pred.profile.kind == INFINITY:
        tail = rep.ratios[len(rep.ratios) // 2:]
        growing = all(b >= a for a, b in zip(tail, tail[1:]))
        rep.verdict = "consistent" if growing and tail and tail[-1] > 1 else "inconclusive"
    return rep


def from_spec(spec: dict) -> Predicate:
    """Build a predicate from its JSON description."""
    kind = spec.get("kind")
    prof = profile_from_spec(spec["profile"]) if "profile" in spec else None
    if kind == "power":
        p = power(int(spec["base"]))
    elif kind == "fibonacci":
        p = fibonacci()
    elif kind == "factorial":
        p = factorial()
    elif kind == "recurrence":
        p = recurrence(spec["coeffs"], spec["init"], prof)
    elif kind == "explicit":
        p = explicit(spec["terms"], prof)
    else:
        raise PredicateError(f"unknown predicate kind {kind!r}")
    if prof is not None:
        p.profile = prof
    p.spec = dict(spec)
    return p


def profile_from_spec(spec: dict) -> GrowthProfile:
    theta = spec.get("theta")
    if theta == "algebraic":
        return GrowthProfile.algebraic(spec["minpoly"], spec["interval"])
    if theta == "rational":
        return GrowthProfile.rational(int(spec["p"]), int(spec.get("q", 1)))
    if theta == "infinity":
        return GrowthProfile.infinity()
    if theta in (None, "empirical"):
        return GrowthProfile.empirical()
    raise PredicateError(f"unknown profile {theta!r}")
