import itertools

import numpy as np
import pytest

from sparsedistal import predicate as P
from sparsedistal.formula import (INF, Affine, Cmp, Const, Context, FormulaError, Gt0, Var,
                                  build_family, clauses_formula, crt, evaluate, evaluate_term,
                                  free_vars, normalize_atoms, parse, substitute, template,
                                  to_list, to_sexp, from_list)
from sparsedistal.operator import dot, as_tuple


@pytest.fixture
def ctx(pow2):
    return Context(pow2)


def test_pcomponent_term(ctx):
    phi = parse("(< (- x y2) (* 2 (P 1 2 (1 2 4) (- x y1))))", ctx)
    # P^1_2(47; 𝐀) = 32
    assert evaluate_term(parse("(P 1 2 (1 2 4) (- x y1))", ctx), {"x": 50, "y1": 3}) == 32
    assert evaluate(phi, {"x": 50, "y1": 3, "y2": 0})


def test_vector_matches_scalar(ctx):
    phi = parse("(or (< (- x y2) (PB 2 (1 2 4) (1 0 -1) (- x y1))) (cong x 2 5))", ctx)
    xs = np.arange(-200, 1500)
    vec = evaluate(phi, {"x": xs, "y1": 7, "y2": -3})
    sc = [evaluate(phi, {"x": int(a), "y1": 7, "y2": -3}) for a in xs]
    assert (np.asarray(vec) == np.array(sc)).all()


def test_big_values_promote(ctx):
    t = parse("(+ (* 1000000000000 x) 1)", ctx)
    xs = np.array([10 ** 7, -(10 ** 7)], dtype=np.int64)
    got = evaluate_term(t, {"x": xs})
    assert [int(v) for v in got] == [10 ** 19 + 1, -(10 ** 19) + 1]


def test_membership_atom(ctx):
    phi = parse("(in x)", ctx)
    assert evaluate(phi, {"x": 64}) and not evaluate(phi, {"x": 65})
    assert evaluate(parse("(in x hi)", ctx), {"x": INF})
    assert not evaluate(parse("(in x)", ctx), {"x": INF})


def test_normalize_equality(ctx):
    cl = normalize_atoms(parse("(= x 0)", ctx))
    assert len(cl) == 1 and len(cl[0].ineqs) == 2


def test_normalize_divisibility(ctx):
    cl = normalize_atoms(parse("(div 2 x)", ctx))
    assert to_sexp(cl[0].to_formula()) == "(cong x 0 2)"


def test_crt(ctx):
    assert crt(1, 2, 2, 3) == (5, 6)
    assert crt(0, 2, 1, 4) is None
    cl = normalize_atoms(parse("(and (cong x 1 2) (cong x 2 3))", ctx))
    assert to_sexp(cl[0].to_formula()) == "(cong x 5 6)"


def test_normal_form_is_equivalent(ctx):
    f = parse("(or (and (< x 7) (not (div 3 (+ x y)))) (!= (* 2 x) 5))", ctx)
    g = clauses_formula(normalize_atoms(f))
    for a, b in itertools.product(range(-30, 30), range(-5, 5)):
        assert evaluate(f, {"x": a, "y": b}) == evaluate(g, {"x": a, "y": b})


def test_family_fn_guard(ctx):
    ts = ctx.space(3, 2, [[1], [2], [4]])
    F = build_family("Fn", ts=ts, A=[[1], [2], [4]], B=[[1], [0], [0]], E=0)
    assert free_vars(F) == {"x", "y1", "y2"}
    with pytest.raises(FormulaError):
        build_family("Fn", ts=ts, A=[[1], [2], [4]], B=[[1], [1], [0]], E=0)
    with pytest.raises(FormulaError):
        build_family("Fn", ts=ts, A=[[1], [2], [4]], B=[[1], [0], [0]], E=2)


def test_family_gn_matches_brute_force(ctx, pow2):
    ts = ctx.space(2, 2, [[1], [1]])
    G = build_family("Gn", ts=ts, A=[[1], [1]], B=[[2], [1]], cap=1024)
    env = {"y1": 0, "y2": 0, "u1": -INF, "u2": 2, "v1": 256, "v2": INF}
    xs = np.arange(0, 200)
    got = np.asarray(evaluate(G, {"x": xs, **env}))
    A, B = as_tuple([[1], [1]]), as_tuple([[2], [1]])
    want = [any(dot(A, pow2, z) < a < dot(B, pow2, z) and 2 <= z[1] and z[0] <= 256
                for z in ts.members(1024)) for a in xs]
    assert (got == np.array(want)).all()


def test_family_e0_and_en(ctx):
    E0 = build_family("E0", fs=[Var("x") - Var("y"), Const(3) - Var("x")])
    assert evaluate(E0, {"x": 2, "y": 1}) and not evaluate(E0, {"x": 3, "y": 1})
    En = build_family("En", ts=ctx.space(1, 0), fs=[Var("x")], As=[[[1]]], cap=1024)
    assert evaluate(En, {"x": 2}) and not evaluate(En, {"x": 1})


def test_sexp_roundtrip(ctx):
    src = "(and (< (- x y2) (PB 2 (1 2 4) (1 0 0) (- x y1))) (not (cong x 1 3)) (in y2))"
    phi = parse(src, ctx)
    again = from_list(to_list(phi), ctx)
    assert again == phi
    assert parse(str(phi), ctx) == phi


def test_template_abstracts_constants(ctx):
    a = parse("(< (+ x 3) y)", ctx)
    b = parse("(< (+ x 10) z)", ctx)
    assert template(a) == template(b)
    assert template(a) != template(parse("(> (+ x 3) y)", ctx))


def test_substitute(ctx):
    phi = parse("(< x y)", ctx)
    assert evaluate(substitute(phi, {"y": Const(5)}), {"x": 4})


def test_parse_errors(ctx):
    with pytest.raises(FormulaError):
        parse("(< x", ctx)
    with pytest.raises(FormulaError):
        parse("(frobnicate x)", ctx)
