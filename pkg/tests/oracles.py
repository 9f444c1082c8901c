"""Independent reference implementations used as test oracles.

Nothing here shares code with rmv.egraph beyond the graph container: relations
are rebuilt from events and rf alone, and cycles are found by enumerating
simple paths.
"""

from __future__ import annotations

import itertools
import random

from rmv.egraph import INIT_WRITE, ExecutionGraph
from rmv.machine import INIT, Action, WriteToken


def _reaches(edges: set[tuple[int, int]], a: int, b: int) -> bool:
    """Is there a non-empty path a -> ... -> b? Plain path enumeration."""

    def walk(v: int, seen: frozenset[int]) -> bool:
        for (p, q) in edges:
            if p != v:
                continue
            if q == b:
                return True
            if q not in seen and walk(q, seen | {q}):
                return True
        return False

    return walk(a, frozenset([a]))


def _has_cycle(edges: set[tuple[int, int]], nodes) -> bool:
    return any(_reaches(edges, v, v) for v in nodes)


def derived_co(g: ExecutionGraph) -> set[tuple[int, int]]:
    """co from scratch: w' co w when w' is read by r and w is another write
    on the same variable that happens before r; init precedes every write."""
    porf = set(g.po) | set(g.rf)
    co: set[tuple[int, int]] = set()
    for (src, r) in g.rf:
        x = g.event(r).var
        for e in g.events:
            if e.kind == "write" and e.var == x and e.id != src and _reaches(porf, e.id, r):
                co.add((e.id, src))
    for e in g.events:
        if e.kind == INIT_WRITE:
            co.update((e.id, w.id) for w in g.events if w.kind == "write" and w.var == e.var)
    return co


def brute_check(g: ExecutionGraph, model: str) -> bool:
    """True when g is consistent with model."""
    nodes = [e.id for e in g.events]
    porf = set(g.po) | set(g.rf)
    if _has_cycle(porf, nodes):
        return False
    co = derived_co(g)
    if model == "sra":
        return not _has_cycle(porf | co, nodes)
    if model == "ra":
        for x in {e.var for e in g.events}:
            cox = {(a, b) for (a, b) in co if g.event(a).var == x}
            if _has_cycle(porf | cox, nodes):
                return False
        return True
    if model == "wra":
        for (src, r) in g.rf:
            x = g.event(r).var
            for e in g.events:
                if e.is_write and e.var == x and e.id != src:
                    if _reaches(porf, src, e.id) and _reaches(porf, e.id, r):
                        return False
        return True
    raise ValueError(model)


def random_actions(rng: random.Random, n: int, threads=("t1", "t2"), vars=("x", "y")) -> list[Action]:
    """A random differentiated trace: each read picks any earlier write on its
    variable, or the initial value."""
    acts: list[Action] = []
    written: dict[str, list[int]] = {x: [] for x in vars}
    val = 0
    for _ in range(n):
        th, x = rng.choice(threads), rng.choice(vars)
        if rng.random() < 0.5:
            val += 1
            written[x].append(val)
            acts.append(Action("W", th, x, "r", value_of(val)))
        else:
            v = rng.choice([0] + written[x])
            acts.append(Action("R", th, x, "r", value_of(v)))
    return acts


def all_action_sequences(n: int, threads=("t1", "t2"), vars=("x", "y")):
    """Every differentiated trace of exactly n read/write steps, values
    numbered in write order."""

    def go(prefix, written, val):
        if len(prefix) == n:
            yield list(prefix)
            return
        for th, x in itertools.product(threads, vars):
            yield from go(prefix + [Action("W", th, x, "r", value_of(val + 1))], {**written, x: written[x] + [val + 1]}, val + 1)
            for v in [0] + written[x]:
                yield from go(prefix + [Action("R", th, x, "r", value_of(v))], written, val)

    yield from go([], {x: [] for x in vars}, 0)


def value_of(n: int):
    return INIT if n == 0 else WriteToken(n)
