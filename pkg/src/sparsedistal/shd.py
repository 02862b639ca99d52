"""Strong honest definitions: cut-based constructors, the catch-all construction,
the system combiner, a window verifier and cell decompositions.

Entailment is always checked relative to a finite window for a′; every report
records the windows it was checked on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import formula as fm
from . import pdelta as pdm
from .formula import (INF, Affine, Bottom, Cmp, Congruence, Const, DefFn, ExtremeDot, FloorDiv,
                      Formula, Gt0, Member, Not, PComp, Sigma, Term, Top, Var, conj, disj,
                      evaluate, evaluate_term, lift, substitute)
from .operator import OperatorTuple, Sign, as_tuple, dot, innocuous_lambda, sign_classify
from .predicate import whole
from .tuplespace import TupleSpace, TupleSpaceError, UncertifiedDelta, certified_space


class SHDError(ValueError):
    pass


class SelectionFailure(SHDError):
    pass


# -- candidates and systems --------------------------------------------------

@dataclass(frozen=True)
class SHDCandidate:
    """ψ(x; y⁽¹⁾, …, y⁽ᵏ⁾): slot j names the variables of y⁽ʲ⁾."""
    formula: Formula
    slots: tuple = ()
    name: str = ""

    @property
    def k(self) -> int:
        return len(self.slots)

    def env(self, c: Sequence[tuple]) -> dict:
        if len(c) != self.k:
            raise SHDError(f"candidate needs {self.k} parameter vectors, got {len(c)}")
        out = {}
        for names, b in zip(self.slots, c):
            if len(names) != len(b):
                raise SHDError("parameter vector arity mismatch")
            out.update(zip(names, b))
        return out

    def holds(self, x, c: Sequence[tuple], xname: str = "x"):
        return evaluate(self.formula, {xname: x, **self.env(c)})


Selector = Callable[[int, Sequence[tuple]], Optional[tuple]]


@dataclass
class SHDSystem:
    candidates: list
    k: int
    provenance: str
    params: tuple = ("y",)
    x: str = "x"
    selector: Optional[Selector] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.candidates and self.selector is None:
            raise SHDError("a system needs at least one candidate")

    def select(self, a: int, B: Sequence[tuple]):
        if self.selector is None:
            return None
        return self.selector(a, B)


def _slot_names(params: Sequence[str], j: int) -> tuple:
    return tuple(f"{p}#{j}" for p in params)


def _in_slot(f: Formula, params: Sequence[str], j: int) -> Formula:
    return substitute(f, {p: Var(f"{p}#{j}") for p in params})


# -- cut-based systems --------------------------------------------------------

@dataclass(frozen=True)
class Cut:
    """A guarded threshold: when guard(y) holds, atom(x; y) ⇔ x >= kappa(y)."""
    atom: Formula
    kappa: Term
    guard: Formula = Top()
    label: str = ""


def cut_system(cuts: Sequence[Cut], params: Sequence[str], x: str = "x", modulus: int = 1,
               provenance: str = "order-base", extra: Formula = Top()) -> SHDSystem:
    """Candidates pin x between the nearest cut at or below it and the nearest cut above it.

    Every candidate has k = 2 slots (one per side, unused slots are padding);
    a residue pin x ≡ r (mod modulus) is added when congruences are involved.
    """
    params = tuple(params)
    s1, s2 = _slot_names(params, 1), _slot_names(params, 2)
    lower = [conj([_in_slot(c.guard, params, 1), _in_slot(c.atom, params, 1)]) for c in cuts]
    upper = [conj([_in_slot(c.guard, params, 2), Not(_in_slot(c.atom, params, 2))]) for c in cuts]
    index: dict = {}
    cands = []
    sides = [None] + list(range(len(cuts)))
    for r in range(modulus):
        pin = Congruence(Var(x), r, modulus) if modulus > 1 else Top()
        for jl in sides:
            for ju in sides:
                parts = [extra, pin]
                if jl is not None:
                    parts.append(lower[jl])
                if ju is not None:
                    parts.append(upper[ju])
                cand = SHDCandidate(conj(parts), (s1, s2), f"L{jl}U{ju}r{r}")
                index[(jl, ju, r)] = len(cands)
                cands.append(cand)

    def selector(a: int, B: Sequence[tuple]):
        best_lo = best_hi = None
        for b in B:
            env = dict(zip(params, b))
            for j, c in enumerate(cuts):
                if not evaluate(c.guard, env):
                    continue
                k = evaluate_term(c.kappa, env)
                if k <= a:
                    key = (-k, tuple(b), j)
                    if best_lo is None or key < best_lo[0]:
                        best_lo = (key, j, tuple(b))
                else:
                    key = (k, tuple(b), j)
                    if best_hi is None or key < best_hi[0]:
                        best_hi = (key, j, tuple(b))
        jl = best_lo[1] if best_lo else None
        ju = best_hi[1] if best_hi else None
        fill = tuple(B[0])
        c = (best_lo[2] if best_lo else fill, best_hi[2] if best_hi else fill)
        return cands[index[(jl, ju, a % modulus if modulus > 1 else 0)]], c

    return SHDSystem(cands, 2, provenance, params, x, selector,
                     {"cuts": [c.label for c in cuts], "modulus": modulus})


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def order_shd(phi: Formula, params: Sequence[str], x: str = "x") -> SHDSystem:
    """System for a quantifier-free Presburger formula, affine in x."""
    clauses = fm.normalize_atoms(phi)
    cuts = []
    seen = set()
    for cl in clauses:
        for f in cl.ineqs:
            alpha = f.coeff(x)
            if alpha == 0 or f in seen:
                continue
            seen.add(f)
            s = Affine.of((1, f), (-alpha, Var(x)))
            if alpha > 0:
                # αx + s > 0 ⇔ x >= ⌊−s/α⌋ + 1
                cuts.append(Cut(Gt0(f), Affine.of((1, FloorDiv(Affine.of((-1, s)), alpha)), const=1),
                                label=str(f)))
            else:
                # ¬(αx + s > 0) ⇔ x >= ⌈s/|α|⌉
                cuts.append(Cut(Gt0(Affine.of((-1, f), const=1)),
                                Affine.of((-1, FloorDiv(Affine.of((-1, s)), -alpha))),
                                label=f"not {f}"))
    modulus = _lcm(cl.modulus for cl in clauses if any(v == x for v, _ in cl.residues))
    return cut_system(cuts, params, x, modulus, "order-base")


def firstcoord_formula(ts: TupleSpace, A, y1: Term = Var("y1"), y2: Term = Var("y2"),
                       x: str = "x") -> Formula:
    """P^1_Δ(x − y_1; 𝐀) = y_2."""
    return Cmp("=", PComp(1, ts, A, Affine.of((1, Var(x)), (-1, y1))), y2)


def firstcoord_shd(ts: TupleSpace, A, y1: Term = Var("y1"), y2: Term = Var("y2"),
                   params: Sequence[str] = ("y1", "y2"), x: str = "x") -> SHDSystem:
    """The interval system for P^1_Δ(x − y_1;𝐀) = y_2: for member y_2 the formula pins
    x − y_1 between min{𝐀·z : z_1 = y_2} and the same minimum at the neighbouring z_1."""
    A = ts.require(A)
    sg = ts.signs(A)[0]
    N = ts.val(ts.lo(1))
    sub = ts.sub

    def m(w: Term) -> Term:
        return ExtremeDot(ts, A, A, w, "min")

    def cut(w: Term, strict: bool, label: str) -> Cut:
        guard = conj([Member(y2, sub), Cmp(">" if strict else ">=", y2, Const(N))])
        atom = Gt0(Affine.of((1, Var(x)), (-1, y1), (-1, m(w))))
        return Cut(atom, Affine.of((1, y1), (1, m(w)), const=1), guard, label)

    if sg > 0:
        cuts = [cut(y2, True, "lo"), cut(Sigma(1, y2, sub), False, "hi")]
    else:
        cuts = [cut(y2, False, "lo"), cut(Sigma(-1, y2, sub), True, "hi")]
    sys = cut_system(cuts, params, x, 1, "firstcoord")
    sys.info.update({"N": N, "sign": sg})
    return sys


# -- verification -------------------------------------------------------------

@dataclass
class VerifyReport:
    passed: bool
    wa: tuple
    wa2: tuple
    points: int
    cells: int = 0
    selector_hits: int = 0
    fallbacks: int = 0
    counterexample: Optional[dict] = None
    caveat: str = "entailment checked on the window for a′ only"

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        out = {"passed": self.passed, "wa": list(self.wa), "wa2": list(self.wa2),
               "points": self.points, "cells": self.cells, "selector_hits": self.selector_hits,
               "fallbacks": self.fallbacks, "caveat": self.caveat}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        return out


def type_matrix(phi: Formula, params: Sequence[str], B: Sequence[tuple], xs: np.ndarray,
                x: str = "x") -> np.ndarray:
    """Row j is φ(xs; b_j) as booleans."""
    rows = []
    for b in B:
        v = evaluate(phi, {x: xs, **dict(zip(params, b))})
        rows.append(np.broadcast_to(np.asarray(v, dtype=bool), xs.shape))
    return np.array(rows, dtype=bool).reshape(len(B), xs.size)


def type_ids(mat: np.ndarray) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.zeros(mat.shape[1], dtype=np.int64)
    _, inv = np.unique(mat.T, axis=0, return_inverse=True)
    return inv.reshape(-1)


def verify_shd(phi: Formula, system: SHDSystem, B: Sequence[tuple], wa: tuple, wa2: tuple,
               brute_limit: int = 20000) -> VerifyReport:
    """For each a in wa find ψ and c ∈ B^k with ψ(a;c) and ψ(x;c) ⊢ tp_φ(a/B) on wa2."""
    B = [tuple(b) for b in B]
    if len(B) < 2:
        raise SHDError("verification needs |B| >= 2")
    lo, hi = min(wa[0], wa2[0]), max(wa[1], wa2[1])
    xs = np.arange(lo, hi + 1, dtype=np.int64)
    in_a = (xs >= wa[0]) & (xs <= wa[1])
    in_a2 = (xs >= wa2[0]) & (xs <= wa2[1])
    types = type_ids(type_matrix(phi, system.params, B, xs, system.x))
    covered = ~in_a
    report = VerifyReport(True, tuple(wa), tuple(wa2), int(in_a.sum()))
    mask_cache: dict = {}

    def mask_of(cand: SHDCandidate, c) -> np.ndarray:
        key = (id(cand), c)
        if key not in mask_cache:
            v = evaluate(cand.formula, {system.x: xs, **cand.env(c)})
            # keep cand alive so its id cannot be recycled while cached
            mask_cache[key] = (cand, np.broadcast_to(np.asarray(v, dtype=bool), xs.shape).copy())
        return mask_cache[key][1]

    def try_pair(pos: int, cand, c) -> bool:
        mk = mask_of(cand, c)
        if not mk[pos]:
            return False
        tau = types[pos]
        sel = mk & in_a2
        if sel.any() and (types[sel] != tau).any():
            return False
        covered[mk & in_a & (types == tau)] = True
        covered[pos] = True
        return True

    while not covered.all():
        pos = int(np.argmin(covered))
        a = int(xs[pos])
        picked = system.select(a, B)
        if picked is not None and try_pair(pos, picked[0], tuple(picked[1])):
            report.selector_hits += 1
            report.cells += 1
            continue
        report.fallbacks += 1
        found = False
        combos = len(system.candidates) * len(B) ** system.k
        if combos <= brute_limit:
            for cand in system.candidates:
                for c in _tuples(B, cand.k):
                    if try_pair(pos, cand, c):
                        found = True
                        break
                if found:
                    break
        if found:
            report.cells += 1
            continue
        report.passed = False
        diag = {"a": str(a), "type": [bool(v) for v in
                                      type_matrix(phi, system.params, B, np.array([a]), system.x)[:, 0]]}
        if picked is not None:
            cand, c = picked
            mk = mask_of(cand, tuple(c))
            bad = np.nonzero(mk & in_a2 & (types != types[pos]))[0]
            diag["selected"] = fm.to_sexp(cand.formula) if not cand.slots else cand.name
            diag["holds_at_a"] = bool(mk[pos])
            if bad.size:
                diag["a_prime"] = str(int(xs[bad[0]]))
        diag["brute_force"] = "exhausted" if combos <= brute_limit else "skipped"
        report.counterexample = diag
        return report
    return report


def _tuples(B: Sequence[tuple], k: int):
    if k == 0:
        yield ()
        return
    for b in B:
        for rest in _tuples(B, k - 1):
            yield (b,) + rest


# -- combining a system into one formula ---------------------------------------

def combine_system(system: SHDSystem) -> SHDSystem:
    """θ = ⋁ᵢ (u⁽ⁱ⁾ = v⁽ⁱ⁾ ∧ ψᵢ), one candidate with k·n + 2n slots."""
    cands = system.candidates
    n = len(cands)
    if n == 0:
        raise SHDError("cannot combine an empty system")
    k = system.k
    params = system.params
    slots: list = []
    disjuncts = []
    for i, cand in enumerate(cands):
        names = [tuple(f"{p}#{i}.{j}" for p in params) for j in range(k)]
        rename = {}
        for old, new in zip(cand.slots, names):
            rename.update({o: Var(nn) for o, nn in zip(old, new)})
        u = tuple(f"{p}#u{i}" for p in params)
        v = tuple(f"{p}#v{i}" for p in params)
        same = conj([Cmp("=", Var(a), Var(b)) for a, b in zip(u, v)])
        disjuncts.append(conj([same, substitute(cand.formula, rename)]))
        slots += names + [u, v]
    theta = SHDCandidate(disj(disjuncts), tuple(slots), "combined")
    pos = {id(c): i for i, c in enumerate(cands)}

    def lift_choice(i: int, c: Sequence[tuple], B: Sequence[tuple]) -> tuple:
        b0 = tuple(B[0])
        b1 = next((tuple(b) for b in B if tuple(b) != b0), None)
        if b1 is None:
            raise SHDError("combining needs two distinct parameters")
        out = []
        for j in range(n):
            out += list(c) if j == i else [b0] * k
            out += [b0, b0] if j == i else [b0, b1]
        return tuple(out)

    def selector(a: int, B: Sequence[tuple]):
        picked = system.select(a, B)
        if picked is None:
            return None
        cand, c = picked
        return theta, lift_choice(pos[id(cand)], c, B)

    out = SHDSystem([theta], theta.k, system.provenance + "+combined", params, system.x,
                    selector if system.selector else None)
    out.info["lift"] = lift_choice
    out.info["source"] = system
    return out


# -- the catch-all construction -----------------------------------------------

def _f(name: str, t: Term) -> Term:
    return t if name == "id" else DefFn(name, t)


def _fval(name: str, v: int) -> int:
    return evaluate_term(_f(name, Const(v)), {})


@dataclass
class CatchallWitness:
    branch: str
    H: tuple
    u: Optional[int]
    K: Optional[tuple]
    lam: int
    T: list
    p: Optional[tuple]
    q: dict
    e: dict
    S_delta: dict
    a_delta: dict
    c_delta: dict
    psi: Formula
    template: str
    t_boundary_flags: int = 0
    components: tuple = ()
    conjuncts: tuple = ()  # (label, formula) for each conjunct of ψ

    def to_json(self) -> dict:
        return {"branch": self.branch, "H": [str(v) for v in self.H], "u": str(self.u),
                "K": None if self.K is None else [str(v) for v in self.K], "Lambda": self.lam,
                "T": [[str(w) for w in t] for t in self.T], "p": None if self.p is None else [[str(v) for v in b] for b in self.p],
                "q": {str(k): _js(v) for k, v in self.q.items()},
                "e": {str(k): _js(v) for k, v in self.e.items()},
                "S_delta": {str(k): [str(b) for b in v] for k, v in self.S_delta.items()},
                "a_delta": {str(k): str(v) for k, v in self.a_delta.items()},
                "c_delta": {str(k): str(v) for k, v in self.c_delta.items()},
                "psi": fm.to_sexp(self.psi), "template": self.template,
                "components": [list(map(str, c)) for c in self.components],
                "t_boundary_flags": self.t_boundary_flags}


def _js(c):
    """A (candidate name, parameter vectors) selection."""
    if c is None:
        return None
    name, vecs = c
    return {"candidate": name, "c": [[str(v) for v in b] for b in vecs]}


def _plug(cand: SHDCandidate, c: Sequence[tuple], x: str, X: Term) -> Formula:
    """γ(X; c): the candidate instantiated at c with its x replaced by the term X."""
    return substitute(cand.formula, {x: X, **{k: Const(v) for k, v in cand.env(c).items()}})


def _pick(system: SHDSystem, point: int, params: Sequence[tuple], what: str):
    got = system.select(point, list(params))
    if got is None:
        raise SelectionFailure(f"no selection for {what} at {point}")
    cand, c = got
    if not evaluate(cand.formula, {system.x: point, **cand.env(c)}):
        raise SelectionFailure(f"{what}: selected candidate fails at {point}")
    return cand, tuple(c)


@dataclass
class CatchallSetup:
    """Everything in the construction that does not depend on (x₀, S)."""
    ts: TupleSpace
    A: OperatorTuple
    E: int
    f: str
    theta: SHDSystem
    theta2: SHDSystem
    lam: int
    xi: dict
    sign: int
    min_val: Optional[int]
    max_val: Optional[int]
    base_z1: int

    @classmethod
    def build(cls, ts: TupleSpace, A, E: int, f: str, theta: SHDSystem, theta2: SHDSystem,
              lam: Optional[int] = None) -> "CatchallSetup":
        A = ts.require(A)
        if any(sign_classify(a, ts.pred).sign == Sign.ZERO for a in A):
            raise SHDError("the catch-all construction needs non-zero operators")
        if lam is None:
            lam = innocuous_lambda(A[0], ts.sub).value
        whole_r = whole(ts.pred)
        xi = {}
        for eps in range(lam + 1):
            y2 = Sigma(eps, PComp(1, ts, A, Affine.of((1, Var("v2")), (-1, Var("v1")))), whole_r)
            xi[eps] = firstcoord_shd(ts, A, Var("v1"), y2, ("v1", "v2"))
        return cls(ts, A, int(E), f, theta, theta2, lam, xi, ts.signs(A)[0],
                   pdm.inf_value(ts, A), pdm.sup_value(ts, A), ts.val(ts.lo(1)))


def catchall_construct(setup: CatchallSetup, x0: int, S: Sequence[tuple]) -> CatchallWitness:
    """An (x₀;S)-strong honest definition for θ(Ex − f(P^1_Δ(x − w;𝐀)); y).

    S holds pairs (b, a) with b the value of w and a the parameter vector of θ.
    """
    S = [(int(b), tuple(a)) for b, a in S]
    if len(S) < 2:
        raise SHDError("the construction needs |S| >= 2")
    ts, A, E, f = setup.ts, setup.A, setup.E, setup.f
    x = Var("x")
    X = lambda inner: Affine.of((E, x), (-1, _f(f, inner)))  # noqa: E731
    bs = [b for b, _ in S]
    pis = sorted({a for _, a in S})
    sg = setup.sign
    whole_r = whole(ts.pred)

    if sg > 0:
        edge = setup.min_val + min(bs)
        H = ("-inf", edge)
        in_H = x0 <= edge
        H_formula = Cmp("<=", x, Const(edge))
    else:
        edge = setup.max_val + max(bs)
        H = (edge, "inf")
        in_H = x0 > edge
        H_formula = Cmp(">", x, Const(edge))
    if in_H:
        point = E * x0 - _fval(f, setup.base_z1)
        cand, c = _pick(setup.theta, point, pis, "γ on H")
        parts = (("H", H_formula), ("gammaH", _plug(cand, c, setup.theta.x, X(Const(setup.base_z1)))))
        psi = conj(f for _, f in parts)
        return CatchallWitness("H", H, None, None, setup.lam, [], None, {0: (cand.name, c)}, {},
                               {}, {}, {}, psi, fm.template(psi),
                               components=(("branch", "H"), ("gamma-H", cand.name)), conjuncts=parts)

    if sg > 0:
        u = max(b for b in bs if x0 > setup.min_val + b)
    else:
        u = min(b for b in bs if x0 <= setup.max_val + b)

    ends = set()
    for b in bs:
        for v in (setup.min_val, setup.max_val):
            if v is not None:
                ends.add(b + v)
    ends = sorted(ends)
    if x0 in ends:
        K_shape = "point"
        K = (x0, x0)
        K_formula = Cmp("=", x, Const(x0))
    else:
        below = [e for e in ends if e < x0]
        above = [e for e in ends if e > x0]
        K = (below[-1] if below else "-inf", above[0] if above else "inf")
        K_shape = ("open" if below and above else "left-ray" if above else
                   "right-ray" if below else "line")
        K_formula = conj(([Cmp(">", x, Const(below[-1]))] if below else [])
                         + ([Cmp("<", x, Const(above[0]))] if above else []))

    lam = setup.lam
    flags = 0
    T = []
    for b, a in S:
        r = pdm.p_delta(ts, A, u - b)
        flags += r.boundary_case
        for eps in range(lam + 1):
            w = _fval(f, ts.pred.successor(r.tuple[0], eps))
            T.append((w,) + a)
    T = sorted(set(T))
    zeta, p = _pick(setup.theta2, E * x0, T, "ζ")

    P1 = lambda t: PComp(1, ts, A, t)  # noqa: E731
    base = P1(Affine.of((1, x), const=-u))
    p1_x0u = pdm.p1(ts, A, x0 - u)
    q = {}
    parts = [("K", K_formula), ("zeta", _plug(zeta, p, setup.theta2.x, Affine.of((E, x))))]
    for delta in range(lam + 1):
        z1 = ts.pred.successor(p1_x0u, delta)
        cand, c = _pick(setup.theta, E * x0 - _fval(f, z1), pis, f"γ at δ={delta}")
        q[delta] = (cand.name, c)
        parts.append((f"gamma{delta}", _plug(cand, c, setup.theta.x, X(Sigma(delta, base, whole_r)))))
    U = sorted({(b, u) for b in bs})
    e = {}
    for eps in range(lam + 1):
        cand, c = _pick(setup.xi[eps], x0, U, f"ξ at ε={eps}")
        e[eps] = (cand.name, c)
        parts.append((f"xi{eps}", _plug(cand, c, "x", x)))
    S_delta, a_delta, c_delta = {}, {}, {}
    for delta in range(lam + 1):
        target = ts.pred.successor(p1_x0u, delta)
        members = sorted({b for b in bs if pdm.p1(ts, A, x0 - b) == target})
        if not members:
            continue
        S_delta[delta] = members
        a_delta[delta], c_delta[delta] = members[0], members[-1]
        shifted = Sigma(delta, base, whole_r)
        parts.append((f"S{delta}a", Cmp("=", P1(Affine.of((1, x), const=-members[0])), shifted)))
        parts.append((f"S{delta}c", Cmp("=", P1(Affine.of((1, x), const=-members[-1])), shifted)))
    parts = [(k, f) for k, f in parts if not isinstance(f, Top)]
    psi = conj(f for _, f in parts)
    if not evaluate(psi, {"x": x0}):
        raise SHDError(f"assembled ψ fails at x₀ = {x0}")
    comps = [("branch", "main"), ("K", K_shape), ("zeta", zeta.name)]
    comps += [("gamma", d, q[d][0]) for d in sorted(q)]
    comps += [("xi", k, e[k][0]) for k in sorted(e)]
    comps += [("S", d) for d in sorted(S_delta)]
    return CatchallWitness("main", H, u, K, lam, T, p, q, e, S_delta, a_delta, c_delta, psi,
                           fm.template(psi), flags, tuple(comps), tuple(parts))


class TemplateRegistry:
    """Observed ψ shapes, tracked per component.

    A catch-all ψ is a conjunction whose shape is fixed by a handful of
    independent choices (the kind of piece K, the candidate taken from each
    sub-system, which strata are non-empty). Each choice ranges over a small
    finite set, so the set of ψ shapes is finite; stabilisation is checked on
    the component choices, and full shapes are counted alongside.
    """

    def __init__(self, bound: Optional[int] = None):
        self.first_seen: dict = {}
        self.shapes: set = set()
        self.bound = bound
        self.instances = 0
        self.selections = 0
        self._current = 0

    def start_instance(self) -> None:
        self.instances += 1
        self._current = self.instances

    def record(self, components: Iterable, shape: Optional[str] = None) -> None:
        self.selections += 1
        for c in components:
            self.first_seen.setdefault(tuple(c), self._current)
        if shape is not None:
            self.shapes.add(shape)

    def __len__(self):
        return len(self.first_seen)

    def stabilized(self, tail: float = 0.5) -> bool:
        """No new component template in the later part of the instance sequence."""
        if self.instances < 2:
            return False
        cut = self.instances - int(self.instances * tail)
        return all(i <= cut for i in self.first_seen.values())

    def within_bound(self) -> bool:
        return self.bound is None or len(self) <= self.bound

    def new_templates_after(self, k: int) -> list:
        return [t for t, i in self.first_seen.items() if i > k]

    def to_json(self) -> dict:
        return {"component_templates": len(self), "full_shapes": len(self.shapes),
                "bound": self.bound, "instances": self.instances,
                "selections": self.selections, "stabilized": self.stabilized(),
                "within_bound": self.within_bound()}


def component_bound(setup: "CatchallSetup") -> int:
    """An a-priori bound on the number of component templates of the catch-all system."""
    lam = setup.lam
    nt, nt2 = len(setup.theta.candidates), len(setup.theta2.candidates)
    nxi = max(len(s.candidates) for s in setup.xi.values())
    # branches, K shapes, ζ, γ per δ, ξ per ε, strata, and the H branch's γ
    return 2 + 5 + nt2 + (lam + 1) * nt + (lam + 1) * nxi + (lam + 1) + nt


def f1_formula(ts: TupleSpace, A, E: int, f: str = "id", box: str = "<") -> Formula:
    """Ex − y_2 □ f(P^1_Δ(x − y_1;𝐀))."""
    x, y1, y2 = Var("x"), Var("y1"), Var("y2")
    return Cmp(box, Affine.of((E, x), (-1, y2)), _f(f, PComp(1, ts, A, Affine.of((1, x), (-1, y1)))))


def f1_shd(ts: TupleSpace, A, E: int, f: str = "id", box: str = "<",
           registry: Optional[TemplateRegistry] = None) -> SHDSystem:
    """The system of catch-all outputs for Ex − y_2 □ f(P^1_Δ(x − y_1;𝐀)), with θ := x □ y′."""
    if box not in ("<", ">"):
        raise SHDError("□ must be < or >")
    # Ex − y_2 □ f(P) ⇔ (Ex − f(P)) □ y_2
    theta = order_shd(Cmp(box, Var("x"), Var("y2")), ("y2",))
    theta2 = order_shd(Cmp(box, Affine.of((1, Var("x")), (-1, Var("w"))), Var("y2")), ("w", "y2"))
    setup = CatchallSetup.build(ts, A, E, f, theta, theta2)
    reg = registry if registry is not None else TemplateRegistry()
    bound = component_bound(setup)
    reg.bound = bound if reg.bound is None else max(reg.bound, bound)

    def selector(a: int, B: Sequence[tuple]):
        wit = catchall_construct(setup, a, [(b[0], tuple(b[1:])) for b in B])
        reg.record(wit.components, wit.template)
        return SHDCandidate(wit.psi, (), wit.template), ()

    sys = SHDSystem([], 0, "catchall", ("y1", "y2"), "x", selector)
    sys.info.update({"registry": reg, "setup": setup, "Lambda": setup.lam})
    return sys


# -- canonical witnesses --------------------------------------------------------

@dataclass(frozen=True)
class NoWitness:
    pass


@dataclass(frozen=True)
class Escape:
    pattern: str


@dataclass(frozen=True)
class WitnessCaseI:
    i: int
    z: tuple


@dataclass(frozen=True)
class WitnessCaseII:
    i: int
    z: tuple


@dataclass(frozen=True)
class WitnessCaseIII:
    z: tuple
    via: str


@dataclass(frozen=True)
class Inconclusive:
    """No witness with z_1 below the search cap; one may exist beyond it."""
    cap: int


@dataclass(frozen=True)
class Unclassified:
    witnesses: int
    sample: tuple


def _is_witness(ts, A, B, x, y1, y2, u, v, z) -> bool:
    if any(not (u[i] <= z[i] <= v[i]) for i in range(ts.n)):
        return False
    return y1 + dot(A, ts.pred, z) < x < y2 + dot(B, ts.pred, z)


def canonical_witness(ts: TupleSpace, A, B, x: int, y1: int, y2: int, u: Sequence, v: Sequence,
                      cap: Optional[int] = None):
    """Search the box for a witness of y_1 + 𝐀·z < x < y_2 + 𝐁·z and classify it."""
    A, B = as_tuple(A), as_tuple(B)
    n = ts.n
    u = [(-INF if w in (None, "-inf") else w) for w in u]
    v = [(INF if w in (None, "inf") else w) for w in v]
    bound = v[0] if v[0] != INF else cap
    if bound is None:
        raise SHDError("v_1 = +∞ needs an explicit search cap")
    sA = [sign_classify(a, ts.pred).s for a in A]
    sB = [sign_classify(b, ts.pred).s for b in B]
    if v[0] == INF and ((sA[0] == 0 and sB[0] > 0) or (sA[0] < 0 and sB[0] == 0)):
        # no classification is claimed here: witnesses may run off to z_1 = +∞
        return Escape("v_1 = +∞ with A_1 = 0 < B_1" if sA[0] == 0 else "v_1 = +∞ with A_1 < 0 = B_1")
    zs = [z for z in ts.members(int(bound)) if _is_witness(ts, A, B, x, y1, y2, u, v, z)]
    if not zs:
        return Inconclusive(int(bound)) if v[0] == INF else NoWitness()
    ws = set(zs)
    if all(s != 0 for s in sA + sB):
        for via, ops, arg in (("P(x-y1;A)", A, x - y1), ("P(y2-x;-B)", -B, y2 - x)):
            try:
                ts.require(ops)
            except UncertifiedDelta:
                try:
                    ts.certify(ops)
                except UncertifiedDelta:
                    continue
            z = pdm.p_delta(ts, ops, arg).tuple
            if z in ws:
                return WitnessCaseIII(z, via)
    for z in zs:
        for i in range(n):
            if z[i] == u[i] or (z[i] == v[i] and not (i == 0 and v[0] == INF)):
                return WitnessCaseII(i + 1, z)
    for z in zs:
        t = ts.idxs(z)
        for i in range(n):
            tight = (t[i] == t[i + 1] + ts.D) if i + 1 < n else (t[i] == 0)
            if tight:
                return WitnessCaseI(i + 1, z)
    return Unclassified(len(zs), zs[0])


# -- the Case-1 regimes -----------------------------------------------------------

@dataclass(frozen=True)
class RegimeReport:
    regime: str  # "low", "high", "middle" or "excluded"
    phi: Optional[bool]
    ok: bool
    detail: str = ""


def case1_regime(ts: TupleSpace, A, B, x: int, y1: int, y2: int,
                 ts1: Optional[TupleSpace] = None) -> RegimeReport:
    """Classify (x, y) for x − y_2 < 𝐁·P_Δ(x − y_1;𝐀) with A_1 ≠ B_1 (E = 1) and check the regime."""
    A, B = ts.require(A), as_tuple(B)
    pred = ts.pred
    diff = OperatorTuple.of(B[0] - A[0])
    nu = sign_classify(diff[0], pred).s
    if nu == 0:
        raise SHDError("Case 1 needs A_1 ≠ B_1 on R")
    a = x - y1
    lo, hi = pdm.inf_value(ts, A), pdm.sup_value(ts, A)
    if (lo is not None and a <= lo) or (hi is not None and a > hi):
        return RegimeReport("excluded", None, True, "outside (inf, sup]")
    P = pdm.p_delta(ts, A, a)
    top = ts.complete(A, (ts.idx(P.tuple[0]),), "max")
    if top is not None and a > ts.dot_idx(A, top):
        return RegimeReport("excluded", None, True, "T(x;y) holds")
    if ts1 is None:
        ts1 = certified_space(ts.sub, 1, ts.delta, diff)
    w = pdm.p_delta(ts1, diff, y1 - y2).tuple[0]
    z1 = P.tuple[0]
    Dl = ts.delta
    phi = x - y2 < dot(B, pred, P.tuple)
    below, above = pred.successor(w, -Dl), pred.successor(w, Dl)
    low = z1 < below if nu > 0 else z1 > above
    high = z1 > above if nu > 0 else z1 < below
    if low:
        return RegimeReport("low", phi, not phi)
    if high:
        return RegimeReport("high", phi, phi)
    i, j = pred.index_of(z1), pred.index_of(w)
    return RegimeReport("middle", phi, abs(i - j) <= Dl, f"ε = {i - j}")


# -- cell decompositions -------------------------------------------------------

@dataclass
class Cell:
    lo: int
    hi: int
    type: tuple
    witness: Optional[dict] = None

    def to_json(self) -> dict:
        out = {"lo": str(self.lo), "hi": str(self.hi), "type": [int(t) for t in self.type]}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass
class CellDecomposition:
    window: tuple
    cells: list
    bound: int

    def to_json(self) -> dict:
        return {"window": [str(w) for w in self.window], "cells": [c.to_json() for c in self.cells],
                "count": len(self.cells), "bound": self.bound}


def decompose(phi: Formula, params: Sequence[str], B: Sequence[tuple], window: tuple,
              system: Optional[SHDSystem] = None, x: str = "x") -> CellDecomposition:
    """Maximal runs of constant φ-type over B; the bound is 1 + Σ_b (changes of φ(·;b))."""
    B = [tuple(b) for b in B]
    xs = np.arange(window[0], window[1] + 1, dtype=np.int64)
    mat = type_matrix(phi, params, B, xs, x) if B else np.zeros((0, xs.size), dtype=bool)
    if xs.size == 0:
        return CellDecomposition(tuple(window), [], 1)
    change = np.zeros(xs.size, dtype=bool)
    if B:
        change[1:] = (mat[:, 1:] != mat[:, :-1]).any(axis=0)
        per_b = int((mat[:, 1:] != mat[:, :-1]).sum())
    else:
        per_b = 0
    starts = [0] + [int(i) for i in np.nonzero(change)[0]]
    cells = []
    for k, s in enumerate(starts):
        e = starts[k + 1] - 1 if k + 1 < len(starts) else xs.size - 1
        typ = tuple(bool(v) for v in mat[:, s]) if B else ()
        wit = None
        if system is not None and len(B) >= 2:
            picked = system.select(int(xs[s]), B)
            if picked is not None:
                cand, c = picked
                wit = {"candidate": cand.name, "c": [[str(v) for v in b] for b in c]}
        cells.append(Cell(int(xs[s]), int(xs[e]), typ, wit))
    return CellDecomposition(tuple(window), cells, 1 + per_b)


def revalidate(phi: Formula, params: Sequence[str], B: Sequence[tuple], dec: CellDecomposition,
               x: str = "x") -> bool:
    """Every point of every cell has the cell's type, and neighbouring cells differ."""
    for i, cell in enumerate(dec.cells):
        xs = np.arange(cell.lo, cell.hi + 1, dtype=np.int64)
        mat = type_matrix(phi, params, B, xs, x)
        if B and not (mat == np.array(cell.type, dtype=bool)[:, None]).all():
            return False
        if i and dec.cells[i - 1].type == cell.type:
            return False
    return True
