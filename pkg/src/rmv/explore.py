"""Enumeration of differentiated runs with on-the-fly model checking.

The search is a depth-first walk over transitions in declaration order.
It keeps an incremental execution graph where each event carries the
bitmask of its hb-predecessors; since po and rf edges only ever point at
the newest event, those masks never change once written. Only reads can
create violations, so the model is re-checked after read steps only.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .egraph import CycleWitness, ExecutionGraph, check, graph_of_run
from .machine import Copy, RegisterMachine, Run, Write, longest_path, longest_simple_path, run_trace

DEFAULT_DEPTH_CAP = 12
EXHAUSTIVE, BOUNDED, VIOLATION = "clean-exhaustive", "clean-bounded", "violation"


class MismatchedRead(ValueError):
    """A run outputs on one variable a value written on another."""


@dataclass(frozen=True)
class ExploreVerdict:
    model: str
    outcome: str
    depth: int
    trace: tuple[int, ...] = ()
    run: Optional[Run] = field(default=None, repr=False)
    graph: Optional[ExecutionGraph] = field(default=None, repr=False)
    witness: Optional[CycleWitness] = None
    nodes: int = 0
    max_depth: int = 0

    @property
    def violated(self) -> bool:
        return self.outcome == VIOLATION

    @property
    def conclusive(self) -> bool:
        return self.outcome != BOUNDED

    def stats(self) -> dict:
        return {"nodes": self.nodes, "max_depth": self.max_depth, "depth": self.depth}


def depth_cap() -> int:
    raw = os.environ.get("RMV_DEPTH_CAP")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"RMV_DEPTH_CAP must be a positive integer, got {raw!r}") from None
        if cap <= 0:
            raise ValueError("RMV_DEPTH_CAP must be positive")
        return cap
    return DEFAULT_DEPTH_CAP


def default_depth(m: RegisterMachine, cap: Optional[int] = None) -> int:
    """Exact longest path for acyclic machines; otherwise the cycle-length
    heuristic 2·|Θ|²·(1+|R|) (or the longest simple path, if larger), capped."""
    exact = longest_path(m)
    if exact is not None:
        return max(exact, 1)
    cap = depth_cap() if cap is None else cap
    bound = 2 * len(m.threads) ** 2 * (1 + len(m.regs))
    return max(1, min(cap, max(bound, longest_simple_path(m, cap))))


class _Search:
    def __init__(self, m: RegisterMachine, model: str, depth: int):
        self.m, self.model, self.depth = m, model, depth
        self.out: dict[str, list] = {}
        for t in m.transitions:
            self.out.setdefault(t.source, []).append(t)
        nv = len(m.vars)
        self.init_of = {x: i for i, x in enumerate(m.vars)}
        self.var: list[str] = list(m.vars)
        self.is_write: list[bool] = [True] * nv
        self.pred: list[int] = [0] * nv
        self.po_next: list[int] = [-1] * nv
        self.rf_succ: list[list[int]] = [[] for _ in range(nv)]
        self.co_succ: list[list[int]] = [[] for _ in range(nv)]
        self.writes: dict[str, list[int]] = {x: [] for x in m.vars}
        self.last: dict[str, int] = {}
        self.regs: dict[str, int] = {r: -1 for r in m.regs}  # -1: initial value
        self.trace: list[int] = []
        self.nodes = 0
        self.max_depth = 0
        self.cut = False
        self.found: Optional[tuple[int, ...]] = None

    def _new_event(self, thread: str, var: str, write: bool, extra_pred: int) -> int:
        e = len(self.var)
        prev = self.last.get(thread, -1)
        mask = extra_pred
        if prev >= 0:
            mask |= self.pred[prev] | (1 << prev)
            self.po_next[prev] = e
        self.var.append(var)
        self.is_write.append(write)
        self.pred.append(mask)
        self.po_next.append(-1)
        self.rf_succ.append([])
        self.co_succ.append([])
        self.last[thread] = e
        return e

    def _pop_event(self, thread: str, prev: int) -> None:
        self.var.pop()
        self.is_write.pop()
        self.pred.pop()
        self.po_next.pop()
        self.rf_succ.pop()
        self.co_succ.pop()
        if prev >= 0:
            self.po_next[prev] = -1
            self.last[thread] = prev
        else:
            del self.last[thread]

    def run(self) -> None:
        self._dfs(self.m.initial)

    def _dfs(self, state: str) -> bool:
        self.nodes += 1
        d = len(self.trace)
        self.max_depth = max(self.max_depth, d)
        succ = self.out.get(state, [])
        if d >= self.depth:
            if succ:
                self.cut = True
            return False
        for t in succ:
            self.trace.append(t.index)
            if self._step(t):
                return True
            self.trace.pop()
        return False

    def _step(self, t) -> bool:
        op = t.op
        if isinstance(op, Copy):
            old = self.regs[op.dst]
            self.regs[op.dst] = self.regs[op.src]
            hit = self._dfs(t.target)
            self.regs[op.dst] = old
            return hit
        prev = self.last.get(op.thread, -1)
        if isinstance(op, Write):
            e = self._new_event(op.thread, op.var, True, 0)
            self.writes[op.var].append(e)
            old = self.regs[op.reg]
            self.regs[op.reg] = e
            hit = self._dfs(t.target)
            self.regs[op.reg] = old
            self.writes[op.var].pop()
            self._pop_event(op.thread, prev)
            return hit
        # read
        src = self.regs[op.reg]
        if src < 0:
            src = self.init_of[op.var]
        elif self.var[src] != op.var:
            raise MismatchedRead(
                f"trace {self.trace}: read on {op.var} outputs a value written on {self.var[src]}"
            )
        r = self._new_event(op.thread, op.var, False, self.pred[src] | (1 << src))
        self.rf_succ[src].append(r)
        hidden = [w for w in self.writes[op.var] if w != src and (self.pred[r] >> w) & 1]
        for w in hidden:
            self.co_succ[w].append(src)
        if self._violates(src, r, hidden):
            self.found = tuple(self.trace)
            return True
        hit = self._dfs(t.target)
        for w in hidden:
            self.co_succ[w].pop()
        self.rf_succ[src].pop()
        self._pop_event(op.thread, prev)
        return hit

    def _violates(self, src: int, r: int, hidden: list[int]) -> bool:
        if not hidden:
            return False
        if self.model == "wra":
            return any((self.pred[w] >> src) & 1 for w in hidden)
        # new co edges (w, src): a cycle exists iff src reaches some w
        x = self.var[src]
        if src < len(self.m.vars):
            return True  # init_x co-precedes every write on x
        targets = set(hidden)
        per_var = self.model == "ra"
        n_init = len(self.m.vars)
        seen = {src}
        stack = [src]
        while stack:
            v = stack.pop()
            nxt = list(self.rf_succ[v])
            if self.po_next[v] >= 0:
                nxt.append(self.po_next[v])
            if not per_var or self.var[v] == x:
                nxt.extend(self.co_succ[v])
                if v < n_init:
                    nxt.extend(self.writes[self.var[v]])
            for w in nxt:
                if w in targets:
                    return True
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False


def find_violation(m: RegisterMachine, model: str, depth: Optional[int] = None) -> ExploreVerdict:
    if model not in ("wra", "ra", "sra"):
        raise ValueError(f"unknown model {model}")
    if depth is None:
        depth = default_depth(m)
    if depth <= 0:
        raise ValueError("depth must be positive")
    s = _Search(m, model, depth)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 3 * depth + 200))
    try:
        s.run()
    finally:
        sys.setrecursionlimit(limit)
    if s.found is not None:
        run, g = replay(m, s.found)
        wit = check(g, model)
        if wit is None:  # the incremental check and the egraph check disagree
            raise AssertionError(f"explore reported a {model} violation that does not replay: {s.found}")
        return ExploreVerdict(model, VIOLATION, depth, s.found, run, g, wit, s.nodes, s.max_depth)
    outcome = BOUNDED if s.cut else EXHAUSTIVE
    return ExploreVerdict(model, outcome, depth, nodes=s.nodes, max_depth=s.max_depth)


def replay(m: RegisterMachine, trace) -> tuple[Run, ExecutionGraph]:
    run = run_trace(m, trace)
    return run, graph_of_run(run, m.vars)


@dataclass(frozen=True)
class WeakestResult:
    weakest: str  # none | wra | ra | sra
    wra: object  # saturation.WRAResult
    verdicts: dict
    depth: int

    @property
    def conclusive(self) -> bool:
        return all(v.conclusive for v in self.verdicts.values())


def weakest_violated(m: RegisterMachine, depth: Optional[int] = None, *, strict_init: bool = False) -> WeakestResult:
    """WRA by saturation, then RA and SRA by enumeration, stopping at the
    first violated model (a violation of a weaker model is one of every
    stronger model)."""
    from .saturation import verify_wra

    if depth is None:
        depth = default_depth(m)
    wra = verify_wra(m, strict_init=strict_init)
    if not wra.passed:
        return WeakestResult("wra", wra, {}, depth)
    verdicts = {}
    for model in ("ra", "sra"):
        v = find_violation(m, model, depth)
        verdicts[model] = v
        if v.violated:
            return WeakestResult(model, wra, verdicts, depth)
    return WeakestResult("none", wra, verdicts, depth)
