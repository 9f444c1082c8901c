from pathlib import Path

import pytest

from rmv.egraph import check
from rmv.explore import (
    BOUNDED,
    EXHAUSTIVE,
    MismatchedRead,
    default_depth,
    depth_cap,
    find_violation,
    replay,
    weakest_violated,
)
from rmv.machine import Read, Write, make_machine, parse_machine

CORPUS = Path(__file__).resolve().parents[1] / "corpus" / "reference"


def load(name):
    return parse_machine((CORPUS / name).read_text())


def test_acyclic_machine_is_exhaustive():
    m = load("exra.rm")
    assert default_depth(m) == 5
    assert find_violation(m, "wra").outcome == EXHAUSTIVE
    v = find_violation(m, "ra")
    assert v.violated and v.trace == (0, 1, 2, 3, 4)


def test_cyclic_machine_without_violation_is_bounded():
    m = make_machine("loop", ["t"], ["x"], ["a"], "q0", [("q0", "q0", Write("t", "x", "a")), ("q0", "q0", Read("t", "x", "a"))])
    v = find_violation(m, "sra", 6)
    assert v.outcome == BOUNDED and not v.conclusive and v.max_depth == 6


def test_violation_replays():
    m = load("not_wra.rm")
    v = find_violation(m, "wra", 8)
    run, g = replay(m, v.trace)
    assert check(g, "wra") is not None
    assert v.stats()["nodes"] == v.nodes > 0


def test_mismatched_read_raises():
    m = make_machine("mm", ["t"], ["x", "y"], ["a"], "q0", [("q0", "q1", Write("t", "y", "a")), ("q1", "q2", Read("t", "x", "a"))])
    with pytest.raises(MismatchedRead):
        find_violation(m, "ra")


def test_depth_cap_env(monkeypatch):
    monkeypatch.setenv("RMV_DEPTH_CAP", "4")
    assert depth_cap() == 4
    assert default_depth(load("m1.rm")) == 4
    monkeypatch.setenv("RMV_DEPTH_CAP", "zero")
    with pytest.raises(ValueError):
        depth_cap()


def test_bad_arguments():
    with pytest.raises(ValueError):
        find_violation(load("m1.rm"), "tso")
    with pytest.raises(ValueError):
        find_violation(load("m1.rm"), "ra", 0)


def test_weakest_violated_stops_early():
    assert weakest_violated(load("not_wra.rm")).weakest == "wra"
    res = weakest_violated(load("exra.rm"))
    assert res.weakest == "ra" and set(res.verdicts) == {"ra"}


def test_violations_grow_with_depth():
    m = load("m1.rm")
    found = [find_violation(m, "ra", d).violated for d in range(1, 9)]
    assert found == sorted(found)  # once found, found at every larger bound
