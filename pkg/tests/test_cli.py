import json
import subprocess
import sys
from pathlib import Path

import pytest

from rmv.cli import main

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


def rmv(*args):
    return subprocess.run([sys.executable, "-m", "rmv", *args], capture_output=True, text=True)


def test_check_exit_codes():
    assert rmv("check", str(CORPUS / "reference" / "not_wra.rm"), "--quiet").returncode == 1
    p = rmv("check", str(CORPUS / "reference" / "exra.rm"), "--model", "wra", "--quiet")
    assert p.returncode == 0 and p.stdout.strip() == "consistent: WRA"
    assert rmv("check", "does-not-exist.rm").returncode == 2


def test_check_bounded_is_inconclusive(tmp_path):
    f = tmp_path / "loop.rm"
    f.write_text("threads t\nvars x\nregs a\ninit q0\nq0 -> q0 : W(t, x, a)\nq0 -> q0 : R(t, x, a)\n")
    p = rmv("check", str(f), "--depth", "4", "--json")
    assert p.returncode == 3
    d = json.loads(p.stdout)
    assert d["conclusive"]["ra"] is False and d["weakest_violated"] == "none"


def test_parse_error_exit(tmp_path, capsys):
    f = tmp_path / "bad.rm"
    f.write_text("threads t\nvars x\nregs a\ninit q0\nq0 -> q1 : W(t, x, z)\n")
    assert main(["check", str(f)]) == 2
    assert "undeclared register 'z'" in capsys.readouterr().err


def test_human_output_has_derivation_and_trace(capsys):
    main(["check", str(CORPUS / "reference" / "not_wra.rm")])
    out = capsys.readouterr().out
    assert "1. rule 1 on t4" in out and "R phi x a 1" in out and "rf-inverse" in out


def test_counterexample_round_trips_through_run(tmp_path, capsys):
    for name in ("not_wra.rm", "exra.rm", "m1.rm"):
        machine = CORPUS / "reference" / name
        code = main(["check", str(machine), "--json"])
        rep = json.loads(capsys.readouterr().out)
        ce = rep["counterexample"]
        trace = tmp_path / "ce.trace"
        trace.write_text("\n".join(ce["trace"]) + "\n")
        code2 = main(["run", str(machine), "--trace", str(trace), "--json"])
        rep2 = json.loads(capsys.readouterr().out)
        assert code == code2 == 1
        assert rep2["verdicts"][ce["model"]]["verdict"] == "violation"
        assert rep2["verdicts"][ce["model"]]["witness"] == ce["witness"]


def test_run_without_machine(tmp_path):
    t = tmp_path / "t.trace"
    t.write_text("W a x r 1\nW b x s 2\nR b x r 1\nR a x s 2\n")
    p = rmv("run", "--no-machine", "--trace", str(t), "--model", "ra", "--quiet")
    assert p.returncode == 1 and "RA" in p.stdout
    t.write_text("W a x r 1\nW a x r 1\n")
    assert rmv("run", "--no-machine", "--trace", str(t)).returncode == 2


def test_dot_output(tmp_path):
    dot = tmp_path / "g.dot"
    rmv("check", str(CORPUS / "reference" / "exra.rm"), "--dot", str(dot))
    assert dot.read_text().startswith("digraph")


def test_gadget_command(tmp_path):
    out = tmp_path / "g.rm"
    assert rmv("gadget", "--taut", "z & !y | !z & y", "-o", str(out)).returncode == 0
    assert rmv("check", str(out), "--model", "ra", "--quiet").returncode == 1
    assert rmv("gadget", "--sat", "a | b | c | d").returncode == 2


@pytest.mark.parametrize("name", sorted(json.loads((CORPUS / "litmus" / "expected.json").read_text())))
def test_litmus_command_matches_corpus(name, tmp_path):
    expected = json.loads((CORPUS / "litmus" / "expected.json").read_text())[name]
    p = rmv("litmus", name, "--check")
    assert p.stdout.strip() == f"weakest violated: {expected.upper() if expected != 'none' else 'none'}"
    out = tmp_path / f"{name}.rm"
    rmv("litmus", name, "-o", str(out))
    assert out.read_text() == (CORPUS / "litmus" / f"{name}.rm").read_text()


def test_usage_errors():
    assert rmv("check").returncode == 2
    assert rmv("check", str(CORPUS / "reference" / "m1.rm"), "--depth", "0").returncode == 2
    assert rmv("litmus", "nope").returncode == 2
    assert rmv("--version").stdout.startswith("rmv ")
