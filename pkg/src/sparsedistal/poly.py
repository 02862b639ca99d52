"""Univariate polynomial helpers over ℚ, coefficients listed from degree 0 upward."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Poly = tuple


def strip(p: Sequence) -> tuple:
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def degree(p: Sequence) -> int:
    return len(strip(p)) - 1


def evaluate(p: Sequence, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def derivative(p: Sequence) -> tuple:
    return strip(tuple(i * c for i, c in enumerate(p))[1:])


def divmod_poly(a: Sequence, b: Sequence) -> tuple[tuple, tuple]:
    """Quotient and remainder of a by b in ℚ[x]."""
    b = strip(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = [Fraction(c) for c in strip(a)]
    q = [Fraction(0)] * max(len(r) - len(b) + 1, 0)
    lead = Fraction(b[-1])
    while len(r) >= len(b) and r:
        shift = len(r) - len(b)
        f = r[-1] / lead
        q[shift] = f
        for i, c in enumerate(b):
            r[shift + i] -= f * c
        r = list(strip(r))
    return strip(q), strip(r)


def remainder(a: Sequence, b: Sequence) -> tuple:
    return divmod_poly(a, b)[1]


def mul(a: Sequence, b: Sequence) -> tuple:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return strip(out)


def sturm_sequence(p: Sequence) -> list[tuple]:
    seq = [strip([Fraction(c) for c in p]), derivative([Fraction(c) for c in p])]
    while seq[-1]:
        r = remainder(seq[-2], seq[-1])
        if not r:
            break
        seq.append(tuple(-c for c in r))
    return seq


def _sign_changes(values) -> int:
    signs = [v > 0 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(p: Sequence, lo, hi) -> int:
    """Number of distinct real roots in the half-open interval (lo, hi], plus lo if it is a root."""
    seq = sturm_sequence(p)
    lo, hi = Fraction(lo), Fraction(hi)
    n = _sign_changes([evaluate(s, lo) for s in seq]) - _sign_changes(
        [evaluate(s, hi) for s in seq])
    if evaluate(p, lo) == 0:
        n += 1
    return n


def rational_roots(p: Sequence) -> list[Fraction]:
    """Rational roots by the rational root test (integer coefficients)."""
    p = strip([int(c) for c in p])
    if not p:
        return []
    roots = []
    if p[0] == 0:
        roots.append(Fraction(0))
        while p and p[0] == 0:
            p = p[1:]
    if len(p) < 2:
        return roots

    def divisors(n):
        n = abs(n)
        return [d for d in range(1, n + 1) if n % d == 0]

    for a in divisors(p[0]):
        for b in divisors(p[-1]):
            for s in (1, -1):
                r = Fraction(s * a, b)
                if evaluate(p, r) == 0 and r not in roots:
                    roots.append(r)
    return roots


def interval_eval(p: Sequence, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """An enclosure of p over [lo, hi] by interval Horner evaluation."""
    alo = ahi = Fraction(0)
    for c in reversed(p):
        cands = (alo * lo, alo * hi, ahi * lo, ahi * hi)
        alo, ahi = min(cands) + c, max(cands) + c
    return alo, ahi


def refine_root(f: Sequence, lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """One bisection step of an interval isolating a simple root of f."""
    if lo == hi:
        return lo, hi
    mid = (lo + hi) / 2
    fm = evaluate(f, mid)
    if fm == 0:
        return mid, mid
    if (evaluate(f, lo) > 0) == (fm > 0) and evaluate(f, lo) != 0:
        return mid, hi
    return lo, mid


def sign_at_root(p: Sequence, f: Sequence, lo: Fraction, hi: Fraction,
                 budget: int = 256):
    """Sign of p(θ) where θ is the unique root of f in [lo, hi].

    Returns (sign, steps) with sign None when the budget ran out before the
    enclosure of p excluded zero.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    for step in range(budget + 1):
        a, b = interval_eval(p, lo, hi)
        if a > 0:
            return 1, step
        if b < 0:
            return -1, step
        if lo == hi:
            return 0, step
        lo, hi = refine_root(f, lo, hi)
    return None, budget
