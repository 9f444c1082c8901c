import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_check, derived_co, random_actions
from rmv.egraph import (
    GraphError,
    add_read,
    add_write,
    check,
    check_ra,
    check_sra,
    check_wra,
    graph_of_actions,
    graph_to_dot,
    graph_to_json,
    hb,
    init_graph,
    totalize_co,
    wra_triples,
)
from rmv.machine import INIT, WriteToken, parse_trace


def two_writer_graph():
    return graph_of_actions(parse_trace("W th x a 1\nW th x a 2\nW ph x b 3\nR ph x a 2\nR th x b 3\n"), ["x"])


def example_graph():
    text = "W th x a 1\nW th x b 2\nW th y c 3\nR ph y c 3\nR ph x a 1\n"
    return graph_of_actions(parse_trace(text), ["x", "y"])


def test_init_graph():
    g = init_graph(["x", "y"])
    assert [(e.id, e.kind, e.var) for e in g.events] == [(0, "init", "x"), (1, "init", "y")]
    assert not g.po and not g.rf and not g.co


def test_two_writer_graph_relations():
    g = two_writer_graph()
    assert g.co == {(1, 2), (1, 3), (2, 3), (3, 2)}
    assert (2, 4) in g.rf and (3, 5) in g.rf
    assert check_wra(g) is None
    wit = check_ra(g)
    assert wit.events == [2, 3, 2] and [k for _, k in wit.steps] == ["co", "co", None]
    assert check_sra(g) is not None


def test_example_graph_wra_triple():
    g = example_graph()
    assert (3, 2) in g.co
    assert wra_triples(g) == [(2, 3, 6)]
    wit = check_wra(g)
    assert wit.steps[-2] == (6, "rf-inverse")


def test_read_of_init_without_writes():
    g = add_read(init_graph(["x"]), "t", "x", INIT)
    assert g.rf == {(0, 1)} and not g.co


def test_only_writes():
    g = add_write(add_write(init_graph(["x"]), "t", "x", WriteToken(1)), "u", "x", WriteToken(2))
    assert not g.rf and not g.co
    assert all(check(g, m) is None for m in ("wra", "ra", "sra"))


def test_add_errors():
    g = add_write(init_graph(["x", "y"]), "t", "x", WriteToken(1))
    with pytest.raises(GraphError):
        add_write(g, "t", "x", WriteToken(1))
    with pytest.raises(GraphError):
        add_read(g, "t", "x", WriteToken(9))
    with pytest.raises(GraphError):
        add_read(g, "t", "y", WriteToken(1))


def test_hb_is_transitive_closure():
    g = example_graph()
    h = hb(g)
    assert (2, 6) in h and (2, 5) in h
    assert all((a, c) in h for (a, b) in h for (b2, c) in h if b == b2)


def test_json_and_dot():
    g = two_writer_graph()
    j = graph_to_json(g)
    assert j["co"] == [[1, 2], [1, 3], [2, 3], [3, 2]]
    dot = graph_to_dot(g, check_ra(g))
    assert dot.startswith("digraph") and "co" in dot


def test_totalize_keeps_ra():
    g = graph_of_actions(parse_trace("W t x a 1\nW u x b 2\nR t x b 2\n"), ["x"])
    t = totalize_co(g)
    assert set(g.co) <= set(t.co)
    assert check_ra(t) is None
    with pytest.raises(GraphError):
        totalize_co(two_writer_graph())


def test_derived_co_matches():
    rng = random.Random(5)
    for _ in range(200):
        g = graph_of_actions(random_actions(rng, 6), ["x", "y"])
        assert g.co_with_init() == derived_co(g)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_model_strength_ordering(seed, n):
    g = graph_of_actions(random_actions(random.Random(seed), n), ["x", "y"])
    sra, ra, wra = (check(g, m) is None for m in ("sra", "ra", "wra"))
    assert not sra or ra
    assert not ra or wra
    for m, ok in (("sra", sra), ("ra", ra), ("wra", wra)):
        assert brute_check(g, m) == ok
