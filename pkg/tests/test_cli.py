import json
import re
import shlex
from pathlib import Path

import pytest

from sparsedistal.cli import execute

README = Path(__file__).resolve().parents[1] / "README.md"


def _golden():
    text = README.read_text()
    for block in re.findall(r"```console\n(.*?)```", text, re.S):
        lines = block.strip().splitlines()
        assert lines[0].startswith("$ sparsedistal ")
        yield shlex.split(lines[0][len("$ sparsedistal "):]), "\n".join(lines[1:])


GOLDEN = list(_golden())


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setenv("SPARSEDISTAL_QUIET", "1")


def test_readme_has_examples():
    assert len(GOLDEN) >= 8


@pytest.mark.parametrize("argv,expected", GOLDEN, ids=[" ".join(g[0][:2]) for g in GOLDEN])
def test_readme_golden(argv, expected):
    code, out, _ = execute(argv)
    assert code == 0
    if expected.lstrip().startswith("{"):
        assert json.loads(out) == json.loads(expected)
    else:
        assert out.strip() == expected.strip()


def test_bad_input_exits_2():
    code, out, _ = execute(["op", "sign", "--pred", "no-such-file", "--coeffs", "[1]"])
    assert code == 2
    assert set(json.loads(out)) == {"error", "detail"}


def test_manifest_replay(tmp_path):
    path = tmp_path / "m.json"
    code, out, man = execute(["--manifest", str(path), "pdelta", "--pred", "fib", "--n", "2",
                              "--ops", "[1,2]", "--x", "1000"])
    assert code == 0 and man["_path"] == str(path)
    man.pop("_path")
    path.write_text(json.dumps(man))
    code, out, _ = execute(["replay", str(path)])
    assert code == 0 and json.loads(out)["reproduced"]


def test_flags_after_subcommand():
    a = execute(["--horizon", "40", "op", "lambda", "--pred", "pow2", "--coeffs", "[1]"])[1]
    b = execute(["op", "lambda", "--pred", "pow2", "--coeffs", "[1]", "--horizon", "40"])[1]
    assert a == b and json.loads(a)["horizon"] == 40


def test_sweep_jobs_match_serial():
    argv = ["sweep", "--pred", "pow2", "--phi", "(< (+ x y) 5)", "--params", "y",
            "--sizes", "1,3,5", "--window", "-30", "30", "--brange", "-10", "10", "--seed", "3"]
    serial = execute(argv)[1]
    assert serial.splitlines()[0] == "size,cells"
    assert execute(["--jobs", "2"] + argv)[1] == serial


def test_decompose_out_file(tmp_path):
    out = tmp_path / "dec.json"
    code, text, _ = execute(["decompose", "--pred", "pow2", "--phi", "(< (+ x y) 5)",
                             "--params", "y", "--B", "[[-2],[3]]", "--window", "0", "10",
                             "--out", str(out)])
    assert code == 0 and json.loads(text)["count"] == 3
    assert json.loads(out.read_text())["revalidated"]
