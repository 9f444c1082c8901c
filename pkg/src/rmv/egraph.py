"""Execution graphs and the WRA / RA / SRA consistency checks."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .machine import INIT, Action, Run, Value, value_to_int

WRITE, READ, INIT_WRITE = "write", "read", "init"
MODELS = ("wra", "ra", "sra")
_KIND_RANK = {"po": 0, "rf": 1, "co": 2}


@dataclass(frozen=True)
class Event:
    id: int
    kind: str
    thread: Optional[str]
    var: str
    value: Value

    @property
    def is_write(self) -> bool:
        return self.kind != READ

    def label(self) -> str:
        v = value_to_int(self.value)
        if self.kind == INIT_WRITE:
            return f"init({self.var})"
        return f"{'W' if self.kind == WRITE else 'R'}({self.thread},{self.var},{v})"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class ExecutionGraph:
    """Events plus po, rf and a partial co. InitWrite(x) precedes every
    write on x in co; that edge is implicit and never stored."""

    events: tuple[Event, ...]
    po: frozenset[tuple[int, int]] = frozenset()
    rf: frozenset[tuple[int, int]] = frozenset()
    co: frozenset[tuple[int, int]] = frozenset()

    def event(self, eid: int) -> Event:
        return self._by_id[eid]

    @property
    def _by_id(self) -> dict[int, Event]:
        cache = self.__dict__.get("_ids")
        if cache is None:
            cache = {e.id: e for e in self.events}
            object.__setattr__(self, "_ids", cache)
        return cache

    def init_of(self, var: str) -> Event:
        for e in self.events:
            if e.kind == INIT_WRITE and e.var == var:
                return e
        raise GraphError(f"no initial write for variable {var}")

    def writes(self, var: Optional[str] = None) -> list[Event]:
        return [e for e in self.events if e.is_write and (var is None or e.var == var)]

    def vars(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.events:
            seen.setdefault(e.var, None)
        return list(seen)

    def co_with_init(self, var: Optional[str] = None) -> set[tuple[int, int]]:
        """Stored co plus the implicit init edges (restricted to `var`)."""
        out = {(a, b) for a, b in self.co if var is None or self.event(a).var == var}
        for e in self.events:
            if e.kind == WRITE and (var is None or e.var == var):
                out.add((self.init_of(e.var).id, e.id))
        return out

    def source_of(self, read_id: int) -> int:
        for w, r in self.rf:
            if r == read_id:
                return w
        raise GraphError(f"read {read_id} has no rf source")


@dataclass(frozen=True)
class CycleWitness:
    """steps[i] = (event, kind of the edge to steps[i+1]); the last entry
    repeats the first event with edge None."""

    model: str
    steps: tuple[tuple[int, Optional[str]], ...]

    @property
    def events(self) -> list[int]:
        return [e for e, _ in self.steps]

    def to_json(self) -> list[dict]:
        return [{"event": e, "edge": k} for e, k in self.steps]


# ------------------------------------------------------------ building


def init_graph(vars: Iterable[str]) -> ExecutionGraph:
    return ExecutionGraph(tuple(Event(i, INIT_WRITE, None, x, INIT) for i, x in enumerate(vars)))


def _append(g: ExecutionGraph, kind: str, thread: str, var: str, value: Value) -> tuple[ExecutionGraph, Event]:
    if not any(e.kind == INIT_WRITE and e.var == var for e in g.events):
        raise GraphError(f"unknown variable {var}")
    e = Event(len(g.events), kind, thread, var, value)
    po = set(g.po)
    po.update((p.id, e.id) for p in g.events if p.thread == thread)
    return ExecutionGraph(g.events + (e,), frozenset(po), g.rf, g.co), e


def add_write(g: ExecutionGraph, thread: str, var: str, value: Value) -> ExecutionGraph:
    if value is INIT or any(w.value == value for w in g.events if w.kind == WRITE):
        raise GraphError(f"duplicate write value {value!r}")
    return _append(g, WRITE, thread, var, value)[0]


def add_read(g: ExecutionGraph, thread: str, var: str, value: Value) -> ExecutionGraph:
    if value is INIT:
        src = g.init_of(var)
    else:
        matches = [w for w in g.events if w.kind == WRITE and w.value == value]
        if not matches:
            raise GraphError(f"no write with value {value!r} for read on {var}")
        if len(matches) > 1:
            raise GraphError(f"ambiguous write value {value!r}")
        src = matches[0]
        if src.var != var:
            raise GraphError(f"read on {var} observes a value written on {src.var}")
    g2, r = _append(g, READ, thread, var, value)
    g2 = ExecutionGraph(g2.events, g2.po, g2.rf | {(src.id, r.id)}, g2.co)
    before = _predecessors(g2, r.id)
    new_co = {(w.id, src.id) for w in g2.writes(var) if w.kind == WRITE and w.id != src.id and w.id in before}
    return ExecutionGraph(g2.events, g2.po, g2.rf, g2.co | new_co)


def graph_of_actions(actions: Iterable[Action], vars: Iterable[str]) -> ExecutionGraph:
    g = init_graph(vars)
    for a in actions:
        if a.kind == "W":
            g = add_write(g, a.thread, a.var, a.value)  # type: ignore[arg-type]
        elif a.kind == "R":
            g = add_read(g, a.thread, a.var, a.value)  # type: ignore[arg-type]
    return g


def graph_of_run(run: Run, vars: Iterable[str]) -> ExecutionGraph:
    return graph_of_actions(run.actions(), vars)


# ------------------------------------------------------------ relations


def _adjacency(pairs: Iterable[tuple[int, int]]) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {}
    for a, b in pairs:
        adj.setdefault(a, []).append(b)
    for v in adj.values():
        v.sort()
    return adj


def _reach_from(adj: dict[int, list[int]], start: int) -> set[int]:
    seen: set[int] = set()
    stack = list(adj.get(start, []))
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(adj.get(v, []))
    return seen


def _predecessors(g: ExecutionGraph, eid: int) -> set[int]:
    radj = _adjacency((b, a) for a, b in g.po | g.rf)
    return _reach_from(radj, eid)


def hb(g: ExecutionGraph) -> set[tuple[int, int]]:
    adj = _adjacency(g.po | g.rf)
    return {(a, b) for a in adj for b in _reach_from(adj, a)}


def _labelled(g: ExecutionGraph, rels: dict[str, Iterable[tuple[int, int]]]) -> dict[tuple[int, int], str]:
    out: dict[tuple[int, int], str] = {}
    for kind, pairs in rels.items():
        for p in pairs:
            if p not in out or _KIND_RANK[kind] < _KIND_RANK[out[p]]:
                out[p] = kind
    return out


def _shortest_cycle(edges: dict[tuple[int, int], str], model: str) -> Optional[CycleWitness]:
    adj = _adjacency(edges)
    best: Optional[list[int]] = None
    for s in sorted(adj):
        if best is not None and len(best) <= 2:
            break
        parent = {s: s}
        queue = deque([s])
        found = None
        while queue and found is None:
            v = queue.popleft()
            for w in adj.get(v, []):
                if w == s:
                    found = v
                    break
                if w not in parent:
                    parent[w] = v
                    queue.append(w)
        if found is None:
            continue
        path = [found]
        while path[-1] != s:
            path.append(parent[path[-1]])
        path.reverse()
        if best is None or len(path) < len(best):
            best = path
    if best is None:
        return None
    cyc = best + [best[0]]
    steps = [(cyc[i], edges[(cyc[i], cyc[i + 1])]) for i in range(len(best))]
    return CycleWitness(model, tuple(steps) + ((cyc[0], None),))


def _bfs_path(adj: dict[int, list[int]], a: int, b: int) -> list[int]:
    parent = {a: a}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        if v == b and v != a:
            break
        for w in adj.get(v, []):
            if w not in parent:
                parent[w] = v
                queue.append(w)
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])
    return path[::-1]


# -------------------------------------------------------------- checks


def check_hb_acyclic(g: ExecutionGraph) -> Optional[CycleWitness]:
    """None when (po ∪ rf)+ is irreflexive, else the shortest cycle."""
    return _shortest_cycle(_labelled(g, {"po": g.po, "rf": g.rf}), "hb")


def wra_triples(g: ExecutionGraph) -> list[tuple[int, int, int]]:
    """All (w', w, r): w' rf r, var(w) = var(w'), w' hb w, w hb r."""
    h = hb(g)
    out = []
    for src, r in sorted(g.rf, key=lambda p: (p[1], p[0])):
        x = g.event(r).var
        for w in g.writes(x):
            if w.id != src and (src, w.id) in h and (w.id, r) in h:
                out.append((src, w.id, r))
    return out


def check_wra(g: ExecutionGraph) -> Optional[CycleWitness]:
    triples = wra_triples(g)
    if not triples:
        return None
    src, w, r = triples[0]
    labels = _labelled(g, {"po": g.po, "rf": g.rf})
    adj = _adjacency(labels)
    path = _bfs_path(adj, src, w)[:-1] + _bfs_path(adj, w, r)
    steps = [(path[i], labels[(path[i], path[i + 1])]) for i in range(len(path) - 1)]
    steps.append((r, "rf-inverse"))
    return CycleWitness("wra", tuple(steps) + ((src, None),))


def check_ra(g: ExecutionGraph) -> Optional[CycleWitness]:
    best: Optional[CycleWitness] = None
    for x in g.vars():
        wit = _shortest_cycle(_labelled(g, {"po": g.po, "rf": g.rf, "co": g.co_with_init(x)}), "ra")
        if wit is not None and (best is None or (len(wit.steps), wit.events) < (len(best.steps), best.events)):
            best = wit
    return best


def check_sra(g: ExecutionGraph) -> Optional[CycleWitness]:
    return _shortest_cycle(_labelled(g, {"po": g.po, "rf": g.rf, "co": g.co_with_init()}), "sra")


def check(g: ExecutionGraph, model: str) -> Optional[CycleWitness]:
    return {"wra": check_wra, "ra": check_ra, "sra": check_sra, "hb": check_hb_acyclic}[model](g)


# -------------------------------------------------------- totalization


def _topo_order(nodes: Iterable[int], pairs: Iterable[tuple[int, int]]) -> Optional[list[int]]:
    """Kahn's algorithm, smallest ready id first; None on a cycle."""
    nodes = list(nodes)
    indeg = {n: 0 for n in nodes}
    adj: dict[int, list[int]] = {}
    for a, b in set(pairs):
        adj.setdefault(a, []).append(b)
        indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in adj.get(n, []):
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    return order if len(order) == len(nodes) else None


def totalize_co(g: ExecutionGraph, model: str = "ra") -> ExecutionGraph:
    """Extend co to a total order per variable that keeps `model` passing.

    Each variable's writes are ordered by a topological order (smallest id
    first) of the relation whose acyclicity the model demands, so every
    added pair points the same way as any existing path.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model}")
    if check(g, model) is not None:
        raise GraphError(f"precondition violated: graph is not {model.upper()}-consistent")
    ids = [e.id for e in g.events]
    base = set(g.po | g.rf)
    orders: dict[str, list[int]] = {}
    if model == "sra":
        order = _topo_order(ids, base | g.co_with_init())
        assert order is not None
        for x in g.vars():
            orders[x] = [i for i in order if g.event(i).is_write and g.event(i).var == x]
    for x in g.vars():
        if x in orders:
            continue
        co_x = g.co_with_init(x)
        order = _topo_order(ids, base | co_x)
        if order is None:  # only reachable for wra: hb and co_x disagree
            writes = [w.id for w in g.writes(x)]
            order = _topo_order(writes, co_x)
            if order is None:
                raise GraphError(f"co on {x} is cyclic; no total order contains it")
        orders[x] = [i for i in order if g.event(i).is_write and g.event(i).var == x]
    co = set(g.co)
    for seq in orders.values():
        real = [i for i in seq if g.event(i).kind == WRITE]
        co.update((a, b) for k, a in enumerate(real) for b in real[k + 1 :])
    return ExecutionGraph(g.events, g.po, g.rf, frozenset(co))


# -------------------------------------------------------------- output


def graph_to_json(g: ExecutionGraph) -> dict:
    return {
        "events": [
            {"id": e.id, "kind": e.kind, "thread": e.thread, "var": e.var, "value": value_to_int(e.value)}
            for e in g.events
        ],
        "po": sorted(map(list, g.po)),
        "rf": sorted(map(list, g.rf)),
        "co": sorted(map(list, g.co)),
    }


def graph_to_dot(g: ExecutionGraph, witness: Optional[CycleWitness] = None, name: str = "egraph") -> str:
    hot: set[tuple[int, int]] = set()
    if witness is not None:
        evs = witness.events
        hot = {(evs[i], evs[i + 1]) for i in range(len(evs) - 1)}
    colour = {"po": "black", "rf": "darkgreen", "co": "firebrick"}
    lines = [f'digraph "{name}" {{', "  node [shape=box, fontname=monospace];"]
    for e in g.events:
        lines.append(f'  e{e.id} [label="e{e.id}: {e.label()}"];')
    # po drawn as the immediate-successor chain only
    imm = {(a, b) for a, b in g.po if not any((a, c) in g.po and (c, b) in g.po for c in _mid(g, a, b))}
    for kind, pairs in (("po", imm), ("rf", g.rf), ("co", g.co)):
        for a, b in sorted(pairs):
            style = ", penwidth=2.5" if (a, b) in hot or (b, a) in hot else ""
            lines.append(f'  e{a} -> e{b} [label="{kind}", color={colour[kind]}{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _mid(g: ExecutionGraph, a: int, b: int) -> Sequence[int]:
    return [e.id for e in g.events if e.id not in (a, b)]
