import random
import re

import numpy as np
import pytest

from sparsedistal import predicate as P
from sparsedistal.formula import Cmp, Context, Top, Var, conj, evaluate, parse
from sparsedistal.predicate import whole
from sparsedistal.shd import (Escape, Inconclusive, NoWitness, SHDCandidate, SHDError, SHDSystem,
                              TemplateRegistry, WitnessCaseIII, canonical_witness, case1_regime,
                              catchall_construct, combine_system, decompose, f1_formula, f1_shd,
                              firstcoord_formula, firstcoord_shd, order_shd, revalidate,
                              type_matrix, verify_shd)
from sparsedistal.tuplespace import certified_space


@pytest.fixture
def ctx(pow2):
    return Context(pow2)


def test_order_system_passes(ctx):
    phi = parse("(< x y)", ctx)
    rep = verify_shd(phi, order_shd(phi, ("y",)), [(3,), (7,)], (0, 10), (0, 10))
    assert rep and rep.cells == 3 and rep.fallbacks == 0


def test_trivial_system_fails(ctx):
    phi = parse("(< x y)", ctx)
    top = SHDSystem([SHDCandidate(Top(), (), "top")], 0, "user", ("y",))
    rep = verify_shd(phi, top, [(3,), (7,)], (0, 10), (0, 10))
    assert not rep and rep.counterexample["a"] == "0"


def test_verifier_needs_two_parameters(ctx):
    phi = parse("(< x y)", ctx)
    with pytest.raises(SHDError):
        verify_shd(phi, order_shd(phi, ("y",)), [(3,)], (0, 10), (0, 10))


def test_congruence_system(ctx):
    rng = random.Random(0)
    phi = parse("(and (> (+ (* 2 x) y1) 0) (< (* 3 x) (+ y2 5)) (cong (+ x y1) 1 3))", ctx)
    sys_ = order_shd(phi, ("y1", "y2"))
    B = [(rng.randint(-500, 500), rng.randint(-500, 500)) for _ in range(10)]
    assert verify_shd(phi, sys_, B, (-3000, 3000), (-3000, 3000))


def test_verifier_soundness_resampled(ctx):
    """Pinned types are never contradicted by fresh (a, a′) pairs."""
    rng = random.Random(1)
    phi = parse("(or (< (* 2 x) y1) (> x (+ y2 4)))", ctx)
    sys_ = order_shd(phi, ("y1", "y2"))
    B = [(rng.randint(-100, 100), rng.randint(-100, 100)) for _ in range(6)]
    assert verify_shd(phi, sys_, B, (-400, 400), (-400, 400))
    xs = np.arange(-400, 401)
    types = type_matrix(phi, ("y1", "y2"), B, xs)
    for _ in range(200):
        a = rng.randint(-400, 400)
        cand, c = sys_.select(a, B)
        mask = np.asarray(evaluate(cand.formula, {"x": xs, **cand.env(c)}), bool)
        assert mask[a + 400]
        assert (types[:, mask] == types[:, [a + 400]]).all()


def test_combined_system(ctx):
    phi = parse("(< x y)", ctx)
    cm = combine_system(order_shd(phi, ("y",)))
    assert verify_shd(phi, cm, [(3,), (7,), (-2,)], (-5, 12), (-5, 12))


def test_firstcoord_system(example_space):
    rng = random.Random(2)
    A = (1, 2, 4)
    phi = firstcoord_formula(example_space, A)
    sys_ = firstcoord_shd(example_space, A)
    B = [(rng.randint(-300, 300), rng.choice([16, 32, 64, 9, 128])) for _ in range(8)]
    assert verify_shd(phi, sys_, B, (-3000, 3000), (-3000, 3000))


def test_firstcoord_non_member_is_false(example_space):
    phi = firstcoord_formula(example_space, (1, 2, 4))
    assert not evaluate(phi, {"x": 47, "y1": 0, "y2": 9})
    assert evaluate(phi, {"x": 47, "y1": 0, "y2": 32})


@pytest.mark.parametrize("E,box", [(1, "<"), (0, "<"), (1, ">")])
def test_f1_system(pow2, E, box):
    rng = random.Random(10 + E)
    ts = certified_space(whole(pow2), 1, 0, (1,))
    sys_ = f1_shd(ts, (1,), E, "id", box)
    phi = f1_formula(ts, (1,), E, "id", box)
    B = [(rng.randint(-200, 200), rng.randint(-200, 200)) for _ in range(4)]
    assert verify_shd(phi, sys_, B, (-500, 500), (-500, 500))


def _catchall(pow2, E=1, box="<"):
    ts = certified_space(whole(pow2), 1, 0, (1,))
    sys_ = f1_shd(ts, (1,), E, "id", box)
    return ts, sys_.info["setup"], f1_formula(ts, (1,), E, "id", box)


def test_catchall_example(pow2):
    ts, setup, phi = _catchall(pow2)
    S = [(3, (50,)), (17, (90,))]
    w = catchall_construct(setup, 100, S)
    assert w.branch == "main"
    assert evaluate(w.psi, {"x": 100})
    xs = np.arange(-10_000, 10_001)
    B = [(3, 50), (17, 90)]
    types = type_matrix(phi, ("y1", "y2"), B, xs)
    mask = np.asarray(evaluate(w.psi, {"x": xs}), bool)
    assert (types[:, mask] == types[:, [100 + 10_000]]).all()


def test_catchall_h_branch(pow2):
    _, setup, _ = _catchall(pow2)
    w = catchall_construct(setup, -50, [(3, (50,)), (17, (90,))])
    assert w.branch == "H"
    assert evaluate(w.psi, {"x": -50})


def test_catchall_needs_two_pairs(pow2):
    _, setup, _ = _catchall(pow2)
    with pytest.raises(SHDError):
        catchall_construct(setup, 100, [(3, (50,))])


def _dropping_group_breaks(pow2, E, box, B, x0, group, window=(-3000, 3000)):
    ts, setup, phi = _catchall(pow2, E, box)
    w = catchall_construct(setup, x0, [(b[0], b[1:]) for b in B])
    xs = np.arange(window[0], window[1] + 1)
    types = type_matrix(phi, ("y1", "y2"), B, xs)
    full = np.asarray(evaluate(w.psi, {"x": xs}), bool)
    tau = types[:, [x0 - window[0]]]
    assert (types[:, full] == tau).all()
    rest = conj(f for lab, f in w.conjuncts if re.sub(r"\d.*", "", lab) != group)
    mask = np.broadcast_to(np.asarray(evaluate(rest, {"x": xs}), bool), xs.shape)
    return bool((types[:, mask] != tau).any())


@pytest.mark.parametrize("E,box,B,x0,group", [
    (0, "<", [(0, -3), (-1000, -600)], 5, "xi"),
    (1, "<", [(0, 1000), (-1, 10)], 100, "S"),
    (1, "<", [(0, 1000), (-1, 10)], 100, "gamma"),
    (0, "<", [(162, 3), (14, -163), (89, 122)], -99, "H"),
])
def test_each_conjunct_group_matters(pow2, E, box, B, x0, group):
    assert _dropping_group_breaks(pow2, E, box, B, x0, group)


def test_zeta_group_matters(fib):
    ts = certified_space(whole(fib), 1, 0, (-1,))
    setup = f1_shd(ts, (-1,), 1, "id", "<").info["setup"]
    phi = f1_formula(ts, (-1,), 1, "id", "<")
    B = [(-13, -7), (-5, 4), (-15, -1), (14, 0)]
    w = catchall_construct(setup, -4, [(b[0], b[1:]) for b in B])
    xs = np.arange(-3000, 3001)
    types = type_matrix(phi, ("y1", "y2"), B, xs)
    rest = conj(f for lab, f in w.conjuncts if lab != "zeta")
    mask = np.asarray(evaluate(rest, {"x": xs}), bool)
    assert (types[:, mask] != types[:, [-4 + 3000]]).any()


def test_template_registry(pow2):
    reg = TemplateRegistry()
    ts = certified_space(whole(pow2), 1, 0, (1,))
    sys_ = f1_shd(ts, (1,), 1, "id", "<", registry=reg)
    phi = f1_formula(ts, (1,), 1, "id", "<")
    rng = random.Random(4)
    for _ in range(3):
        reg.start_instance()
        B = [(rng.randint(-100, 100), rng.randint(-100, 100)) for _ in range(3)]
        assert verify_shd(phi, sys_, B, (-300, 300), (-300, 300))
    assert reg.within_bound() and len(reg) > 0


def test_decompose(ctx):
    phi = parse("(< x y)", ctx)
    dec = decompose(phi, ("y",), [(3,), (7,)], (0, 10))
    assert [(c.lo, c.hi) for c in dec.cells] == [(0, 2), (3, 6), (7, 10)]
    assert revalidate(phi, ("y",), [(3,), (7,)], dec)
    assert len(decompose(parse("(< 1 2)", ctx), (), [], (0, 10)).cells) == 1


def test_decompose_f1_within_bound(pow2):
    rng = random.Random(6)
    ts = certified_space(whole(pow2), 1, 0, (1,))
    phi = f1_formula(ts, (1,), 1, "id", "<")
    sys_ = f1_shd(ts, (1,), 1, "id", "<")
    B = [(rng.randint(-300, 300), rng.randint(-300, 300)) for _ in range(5)]
    dec = decompose(phi, ("y1", "y2"), B, (-1000, 1000), sys_)
    assert len(dec.cells) <= dec.bound
    assert revalidate(phi, ("y1", "y2"), B, dec)
    assert all(c.witness is not None for c in dec.cells)


def test_canonical_witness_examples(pow2):
    ts = certified_space(whole(pow2), 2, 4, (1, 2), (1, -3))
    got = canonical_witness(ts, (1, 2), (1, -3), 100, 0, 200, [None, None], [64, None])
    assert isinstance(got, WitnessCaseIII)
    none = canonical_witness(ts, (1, 2), (1, 2), 100, 5, 3, [None, None], [64, None])
    assert isinstance(none, NoWitness)
    ts0 = certified_space(whole(pow2), 2, 4)
    esc = canonical_witness(ts0, (0, 1), (1, 1), 10 ** 6, 0, 0, [None, None], [None, None],
                            cap=2 ** 12)
    assert isinstance(esc, Escape)
    far = canonical_witness(ts, (1, 2), (1, -3), 10 ** 6, 0, -10 ** 7, [None, None], [None, None],
                            cap=2 ** 10)
    assert isinstance(far, Inconclusive)


def test_case1_regimes(pow2):
    ts = certified_space(whole(pow2), 2, 2, (1, 2))
    rng = random.Random(8)
    seen = set()
    for _ in range(400):
        x, y1, y2 = (rng.randint(-10 ** 4, 10 ** 4) for _ in range(3))
        rep = case1_regime(ts, (1, 2), (3, 1), x, y1, y2)
        assert rep.ok, rep
        seen.add(rep.regime)
    assert "excluded" in seen
