"""Command-line front end.

Every command prints one JSON document (integers as decimal strings) on
stdout and a run manifest on stderr, or to ``--manifest PATH``. Exit codes:
0 success, 1 property violation, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import redirect_stdout
from typing import Any, Optional, Sequence

from . import __version__
from . import formula as fm
from . import pdelta as pdm
from . import predicate as pm
from . import shd as sm
from . import tuplespace as tsm
from .operator import (DEFAULT_HORIZON, Operator, OperatorError, as_operator, as_tuple,
                       beats_witness, innocuous_lambda, s2_witness, sign_classify)
from .predicate import PredicateError, SubPredicate, whole

INPUT_ERRORS = (OSError, json.JSONDecodeError, PredicateError, OperatorError,
                tsm.TupleSpaceError, fm.FormulaError, sm.SHDError, KeyError, TypeError)


class Run:
    """Collects everything the manifest needs while a command executes."""

    def __init__(self, argv: Sequence[str], horizon: int, seed: Optional[int]):
        self.argv = list(argv)
        self.horizon = horizon
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.certificates: list[dict] = []

    def load(self, arg: str) -> Any:
        """JSON from a file path, or the argument itself when it is inline JSON."""
        s = arg.strip()
        if s[:1] in "[{" or s.lstrip("-").isdigit():
            return json.loads(s)
        with open(arg, "rb") as fh:
            data = fh.read()
        self.inputs[arg] = hashlib.sha256(data).hexdigest()
        return json.loads(data)

    def text(self, arg: str) -> str:
        s = arg.strip()
        if s[:1] in "[(":
            return s
        with open(arg, "rb") as fh:
            data = fh.read()
        self.inputs[arg] = hashlib.sha256(data).hexdigest()
        return data.decode()

    def note_space(self, ts: tsm.TupleSpace) -> None:
        for ops, cert in ts.certified_for.items():
            entry = {"space": repr(ts), "ops": ops.to_json()["ops"], **cert.to_json()}
            if entry not in self.certificates:
                self.certificates.append(entry)

    def manifest(self, output: str, code: int) -> dict:
        return {"command": self.argv, "inputs": self.inputs, "horizon": self.horizon,
                "certificates": self.certificates, "seed": self.seed, "version": __version__,
                "exit_code": code, "output_sha256": hashlib.sha256(output.encode()).hexdigest()}


SHORT_PREDS = {"pow2": {"kind": "power", "base": 2}, "pow3": {"kind": "power", "base": 3},
               "fib": {"kind": "fibonacci"}, "fibonacci": {"kind": "fibonacci"},
               "factorial": {"kind": "factorial"}}


def load_pred(run: Run, arg: str) -> pm.Predicate:
    spec = SHORT_PREDS.get(arg)
    if spec is None:
        spec = run.load(arg)
    return pm.from_spec(spec)


def load_sub(pred: pm.Predicate, args) -> SubPredicate:
    N, d = getattr(args, "N", 0), getattr(args, "d", 1)
    return whole(pred) if (N, d) == (0, 1) else SubPredicate(pred, N, d)


def load_ops(run: Run, arg: str):
    data = run.load(arg)
    if isinstance(data, dict):
        data = data["ops"]
    return as_tuple([[int(c)] if isinstance(c, (int, str)) else c for c in data])


def space(run: Run, sub: SubPredicate, n: int, delta: Optional[int], *op_tuples) -> tsm.TupleSpace:
    if delta is None:
        delta = max(tsm.sufficient_delta(o, sub, n, run.horizon).value for o in op_tuples)
    ts = tsm.certified_space(sub, n, delta, *op_tuples, horizon=run.horizon)
    run.note_space(ts)
    return ts


def int_list(text: str) -> list[int]:
    return [int(v) for v in json.loads(text)] if text.strip().startswith("[") else \
        [int(v) for v in text.split(",") if v.strip()]


def str_ints(obj):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, (list, tuple)):
        return [str_ints(v) for v in obj]
    if isinstance(obj, dict):
        return {k: str_ints(v) for k, v in obj.items()}
    return obj


def emit(obj) -> None:
    print(json.dumps(obj, ensure_ascii=False, sort_keys=True))


def params_of(phi, given: Optional[str], x: str = "x") -> tuple:
    if given:
        return tuple(p.strip() for p in given.split(",") if p.strip())
    return tuple(sorted(fm.free_vars(phi) - {x}))


def load_B(run: Run, arg: str) -> list[tuple]:
    data = run.load(arg)
    return [tuple(int(v) for v in (b if isinstance(b, list) else [b])) for b in data]


# -- pred ------------------------------------------------------------------------

def cmd_pred(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    if args.action == "terms":
        emit({"name": pred.name, "terms": str_ints(pred.prefix(args.count)),
              "profile": pred.profile.to_json()})
    elif args.action == "regular":
        rep = pm.check_regular_window(pred, args.window, args.minpoly and int_list(args.minpoly))
        emit(rep.to_json())
        return 1 if rep.verdict == "refuted" else 0
    elif args.action == "period":
        got = pm.congruence_period(pred, args.m, args.window)
        if isinstance(got, pm.NotFound):
            emit({"found": False, "horizon": got.horizon})
            return 1
        emit({"found": True, "N": got[0], "d": got[1]})
    return 0


# -- op --------------------------------------------------------------------------

def cmd_op(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    if args.action == "sign":
        emit(sign_classify(as_operator(int_list(args.coeffs)), pred, run.horizon).to_json())
    elif args.action == "s2":
        emit(s2_witness(as_operator(int_list(args.coeffs)), pred, run.horizon).to_json())
    elif args.action == "beats":
        a, b = as_operator(int_list(args.coeffs)), as_operator(int_list(args.other))
        emit(beats_witness(a, b, pred, run.horizon).to_json())
    elif args.action == "lambda":
        a = as_operator(int_list(args.coeffs))
        emit(innocuous_lambda(a, load_sub(pred, args), run.horizon).to_json())
    return 0


# -- tuple -----------------------------------------------------------------------

def cmd_tuple(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    sub = load_sub(pred, args)
    if args.action == "members":
        ts = tsm.TupleSpace(sub, args.n, args.delta)
        emit({"members": [str_ints(list(z)) for z in ts.members(args.bound)]})
        return 0
    ops = load_ops(run, args.ops)
    if args.action == "delta":
        c = tsm.sufficient_delta(ops, sub, ops.n, run.horizon)
        emit(c.to_json())
    elif args.action == "collision":
        hit = tsm.find_collision(ops, sub, ops.n, args.delta, args.bound)
        emit({"collision": None if hit is None else
              {"z": str_ints(list(hit[0])), "w": str_ints(list(hit[1])), "value": str(hit[2])}})
    elif args.action == "order":
        ts = space(run, sub, ops.n, args.delta, ops)
        rows = [{"z": str_ints(list(z)), "value": str(v)}
                for z, v in tsm.enumerate_in_order(ts, ops, args.count)]
        emit({"delta": ts.delta, "order": rows})
    return 0


# -- pdelta ----------------------------------------------------------------------

def cmd_pdelta(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    ops = load_ops(run, args.ops)
    if args.n is not None and args.n != ops.n:
        raise tsm.TupleSpaceError(f"--n {args.n} does not match the arity {ops.n} of --ops")
    ts = space(run, load_sub(pred, args), ops.n, args.delta, ops)
    out = {"delta": ts.delta, "x": str(args.x), **pdm.pq_json(ts, ops, args.x)}
    if args.oracle:
        p, q = pdm.pq_oracle(ts, ops, args.x, args.oracle)
        out["oracle"] = {"P": p.to_json(), "Q": q.to_json()}
        agree = p.tuple == tuple(int(v) for v in out["P"]["z"]) and \
            q.tuple == tuple(int(v) for v in out["Q"]["z"])
        out["oracle_agrees"] = agree
        emit(out)
        return 0 if agree else 1
    emit(out)
    return 0


# -- shd -------------------------------------------------------------------------

def build_system(run: Run, spec: dict, phi, params: tuple, ctx: fm.Context) -> sm.SHDSystem:
    kind = spec.get("kind", "order")
    if kind == "order":
        return sm.order_shd(phi, params)
    if kind in ("firstcoord", "f1"):
        ops = as_tuple([[int(c) for c in a] for a in spec["ops"]])
        ts = space(run, ctx.sub(spec.get("N", 0), spec.get("d", 1)), ops.n, spec.get("delta"), ops)
        if kind == "firstcoord":
            return sm.firstcoord_shd(ts, ops)
        return sm.f1_shd(ts, ops, int(spec.get("E", 1)), spec.get("f", "id"), spec.get("box", "<"))
    if kind == "explicit":
        cands = [sm.SHDCandidate(fm.from_list(c["formula"], ctx),
                                 tuple(tuple(s) for s in c["slots"]), c.get("name", f"c{i}"))
                 for i, c in enumerate(spec["candidates"])]
        k = max((c.k for c in cands), default=0)
        return sm.SHDSystem(cands, k, "explicit", params)
    raise sm.SHDError(f"unknown system kind {kind!r}")


def formula_of(run: Run, ctx: fm.Context, arg: str):
    return fm.parse(run.text(arg), ctx)


def cmd_shd(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    ctx = fm.Context(pred)
    if args.action == "verify":
        phi = formula_of(run, ctx, args.phi)
        params = params_of(phi, args.params)
        system = build_system(run, run.load(args.system), phi, params, ctx)
        if system.params != params and system.provenance != "explicit":
            params = system.params
        B = load_B(run, args.B)
        rep = sm.verify_shd(phi, system, B, tuple(args.wa), tuple(args.wa2))
        for ts in ctx._spaces.values():
            run.note_space(ts)
        out = rep.to_json()
        reg = system.info.get("registry")
        if reg is not None:
            out["templates"] = reg.to_json()
        emit(str_ints(out))
        return 0 if rep.passed else 1
    if args.action == "catchall":
        ops = load_ops(run, args.ops)
        ts = space(run, load_sub(pred, args), ops.n, args.delta, ops)
        system = sm.f1_shd(ts, ops, args.E, args.f, args.box)
        S = [(int(s[0]), tuple(int(v) for v in s[1:])) for s in run.load(args.S)]
        wit = sm.catchall_construct(system.info["setup"], args.x0, S)
        emit(wit.to_json())
        return 0
    if args.action == "witness":
        A, B = load_ops(run, args.A), load_ops(run, args.Bops)
        sub = load_sub(pred, args)
        ts = tsm.TupleSpace(sub, A.n, args.delta)
        for o in (A, B):
            try:
                ts.certify(o, run.horizon)
            except tsm.UncertifiedDelta:
                pass
        run.note_space(ts)
        u = [None if v in ("-inf", None) else int(v) for v in run.load(args.u)]
        v = [None if w in ("inf", None) else int(w) for w in run.load(args.v)]
        got = sm.canonical_witness(ts, A, B, args.x, args.y1, args.y2, u, v, args.cap)
        out = {"class": type(got).__name__}
        out.update({k: str_ints(list(w)) if isinstance(w, tuple) else str_ints(w)
                    for k, w in vars(got).items()})
        emit(out)
        return 0
    raise sm.SHDError(f"unknown shd action {args.action}")


# -- decompose and sweep -----------------------------------------------------------

def cmd_decompose(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    ctx = fm.Context(pred)
    phi = formula_of(run, ctx, args.phi)
    params = params_of(phi, args.params)
    B = load_B(run, args.B) if args.B else []
    system = build_system(run, run.load(args.system), phi, params, ctx) if args.system else None
    dec = sm.decompose(phi, params, B, tuple(args.window), system)
    ok = sm.revalidate(phi, params, B, dec) and len(dec.cells) <= dec.bound
    out = dec.to_json()
    out["revalidated"] = ok
    text = json.dumps(out, ensure_ascii=False, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        emit({"out": args.out, "count": len(dec.cells), "bound": dec.bound, "revalidated": ok})
    else:
        print(text)
    return 0 if ok else 1


def _sweep_point(job: tuple) -> tuple[int, int]:
    pred_spec, phi_text, params, B, window = job
    pred = pm.from_spec(pred_spec)
    phi = fm.parse(phi_text, fm.Context(pred))
    return len(B), len(sm.decompose(phi, params, B, window).cells)


def cmd_sweep(run: Run, args) -> int:
    pred = load_pred(run, args.pred)
    phi_text = run.text(args.phi)
    phi = fm.parse(phi_text, fm.Context(pred))
    params = params_of(phi, args.params)
    seed = 0 if run.seed is None else run.seed
    run.seed = seed
    rng = random.Random(seed)
    lo, hi = args.brange
    jobs = []
    for size in int_list(args.sizes):
        B = [tuple(rng.randint(lo, hi) for _ in params) for _ in range(size)]
        jobs.append((pred.spec, phi_text, params, B, tuple(args.window)))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "cells"])
    w.writerows(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


# -- replay ------------------------------------------------------------------------

def cmd_replay(run: Run, args) -> int:
    with open(args.manifest) as fh:
        man = json.load(fh)
    argv = list(man["command"])
    if "--manifest" in argv:
        i = argv.index("--manifest")
        del argv[i:i + 2]
    code, output, _ = execute(argv)
    same = hashlib.sha256(output.encode()).hexdigest() == man["output_sha256"]
    emit({"reproduced": same, "exit_code": code, "expected_exit_code": man.get("exit_code")})
    return 0 if same and code == man.get("exit_code", code) else 1


# -- argument parsing ----------------------------------------------------------------

def _add_sub(p) -> None:
    p.add_argument("--N", type=int, default=0, help="offset of the subpredicate")
    p.add_argument("--d", type=int, default=1, help="step of the subpredicate")


def _globals(p, default) -> None:
    p.add_argument("--horizon", type=int, default=default(DEFAULT_HORIZON),
                   help="predicate horizon for window checks")
    p.add_argument("--seed", type=int, default=default(None))
    p.add_argument("--jobs", type=int, default=default(1))
    p.add_argument("--manifest", default=default(None), help="write the run manifest here")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="sparsedistal", description=__doc__.splitlines()[0])
    _globals(top, lambda v: v)
    top.add_argument("--version", action="version", version=__version__)
    # the global flags are also accepted after the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    _globals(shared, lambda v: argparse.SUPPRESS)
    sub = top.add_subparsers(dest="command", required=True)

    class _Cmds:
        @staticmethod
        def add_parser(name, **kw):
            return sub.add_parser(name, parents=[shared], **kw)

    cmds = _Cmds()

    p = cmds.add_parser("pred", help="inspect a predicate")
    p.add_argument("action", choices=["terms", "regular", "period"])
    p.add_argument("--pred", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--minpoly", default=None)
    p.add_argument("--m", type=int, default=2)
    p.set_defaults(fn=cmd_pred)

    p = cmds.add_parser("op", help="operator signs and constants")
    p.add_argument("action", choices=["sign", "s2", "beats", "lambda"])
    p.add_argument("--pred", required=True)
    p.add_argument("--coeffs", required=True, help="a_0,a_1,... or a JSON list")
    p.add_argument("--other", default="[0]", help="second operator for beats")
    _add_sub(p)
    p.set_defaults(fn=cmd_op)

    p = cmds.add_parser("tuple", help="gapped tuple spaces")
    p.add_argument("action", choices=["members", "delta", "collision", "order"])
    p.add_argument("--pred", required=True)
    p.add_argument("--ops", default=None)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--bound", type=int, default=64)
    p.add_argument("--count", type=int, default=10)
    _add_sub(p)
    p.set_defaults(fn=cmd_tuple)

    p = cmds.add_parser("pdelta", help="P_Δ and Q_Δ at a point")
    p.add_argument("--pred", required=True)
    p.add_argument("--ops", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--oracle", type=int, default=None, help="also run the window oracle to this index")
    _add_sub(p)
    p.set_defaults(fn=cmd_pdelta)

    p = cmds.add_parser("shd", help="strong honest definitions")
    p.add_argument("action", choices=["verify", "catchall", "witness"])
    p.add_argument("--pred", required=True)
    p.add_argument("--phi")
    p.add_argument("--params", default=None, help="comma-separated parameter names")
    p.add_argument("--system", default='{"kind": "order"}')
    p.add_argument("--B", default=None)
    p.add_argument("--wa", type=int, nargs=2, default=(-10000, 10000))
    p.add_argument("--wa2", type=int, nargs=2, default=(-10000, 10000))
    p.add_argument("--ops")
    p.add_argument("--E", type=int, default=1)
    p.add_argument("--f", default="id")
    p.add_argument("--box", default="<", choices=["<", ">"])
    p.add_argument("--delta", type=int, default=None)
    p.add_argument("--x0", type=int, default=0)
    p.add_argument("--S")
    p.add_argument("--A")
    p.add_argument("--Bops")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--y1", type=int, default=0)
    p.add_argument("--y2", type=int, default=0)
    p.add_argument("--u", default="[]")
    p.add_argument("--v", default="[]")
    p.add_argument("--cap", type=int, default=None)
    _add_sub(p)
    p.set_defaults(fn=cmd_shd)

    p = cmds.add_parser("decompose", help="cells of constant φ-type")
    p.add_argument("--pred", default="pow2")
    p.add_argument("--phi", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--B", default=None)
    p.add_argument("--window", type=int, nargs=2, required=True)
    p.add_argument("--system", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_decompose)

    p = cmds.add_parser("sweep", help="cell counts against |B| as CSV")
    p.add_argument("--pred", default="pow2")
    p.add_argument("--phi", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--sizes", default="2,4,8,16")
    p.add_argument("--window", type=int, nargs=2, default=(-1000, 1000))
    p.add_argument("--brange", type=int, nargs=2, default=(-500, 500))
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = cmds.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    p.set_defaults(fn=cmd_replay)
    return top


def execute(argv: Sequence[str]) -> tuple[int, str, Optional[dict]]:
    """Run a command; returns (exit code, stdout text, manifest)."""
    parser = build_parser()
    args = parser.parse_args(list(argv))
    run = Run(argv, args.horizon, args.seed)
    buf = io.StringIO()
    try:
        with redirect_stdout(buf):
            code = args.fn(run, args)
    except INPUT_ERRORS as e:
        buf = io.StringIO()
        buf.write(json.dumps({"error": type(e).__name__, "detail": str(e)}, sort_keys=True) + "\n")
        code = 2
    out = buf.getvalue()
    if args.command == "replay":
        return code, out, None
    man = run.manifest(out, code)
    if args.manifest:
        man["_path"] = args.manifest
    return code, out, man


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    code, out, man = execute(argv)
    sys.stdout.write(out)
    if man is not None:
        text = json.dumps(man, sort_keys=True)
        path = man.pop("_path", None)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        elif os.environ.get("SPARSEDISTAL_QUIET") != "1":
            sys.stderr.write(text + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
