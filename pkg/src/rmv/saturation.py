"""Backward saturation engines deciding WRA for a whole machine.

Three stages run in order: ghost reads (a read outputs a register that was
never filled), mismatched variables (a value written on y is output on x),
and hidden reads (Visible/Hidden facts plus alias facts for a read that
shares its source with a later write, rules 1-10). Every fact remembers
its first derivation so a failure can be replayed as a path.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Union

from .machine import (
    INIT,
    Read,
    RegisterMachine,
    Run,
    Transition,
    Write,
    prune_unreachable,
    run_trace,
)

VISIBLE, HIDDEN = "Visible", "Hidden"
STAGES = ("ghost", "mismatch", "hidden")

# tracker of a hidden-read fact: ("thread", name) or ("reg", name)
Tracker = tuple[str, str]
GhostFact = tuple[str, str]  # (state, reg)
MismatchFact = tuple[str, str, str]  # (state, reg, var)
SatFact = tuple[str, str, Tracker, str, str]  # (state, watched, tracker, var, status)
Fact = Union[GhostFact, MismatchFact, SatFact]


@dataclass(frozen=True)
class Fail:
    state: str


@dataclass(frozen=True)
class Origin:
    rule: int
    transition: Optional[int]
    premise: Optional[Fact]


@dataclass(frozen=True)
class DerivationStep:
    rule: int
    transition: Optional[int]
    premises: tuple[str, ...]
    produced: str

    def to_json(self) -> dict:
        return {"rule": self.rule, "transition_index": self.transition, "premises": list(self.premises), "produced": self.produced}


@dataclass(frozen=True)
class StageVerdict:
    stage: str
    passed: bool
    facts_count: int
    flagged_state: Optional[str] = None
    derivation: tuple[DerivationStep, ...] = ()
    witness_trace: Optional[tuple[int, ...]] = None  # provenance path, validated
    facts: frozenset = field(default=frozenset(), compare=False, repr=False)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        out = {
            "stage": self.stage,
            "verdict": self.verdict,
            "facts_count": self.facts_count,
            "derivation": [d.to_json() for d in self.derivation],
        }
        if self.flagged_state is not None:
            out["flagged_state"] = self.flagged_state
        if self.witness_trace is not None:
            out["witness_trace"] = list(self.witness_trace)
        return out


# ------------------------------------------------------------- engine


Rule = Callable[[Transition, Fact], Iterable[tuple[int, Union[Fact, Fail]]]]


def _saturate(
    m: RegisterMachine,
    seeds: Iterable[tuple[int, Transition, Fact]],
    rules: Rule,
    fail_at: Callable[[Fact], bool] = lambda f: False,
    fail_rule: int = 2,
    stop_at_fail: bool = True,
    rng: Optional[random.Random] = None,
) -> tuple[dict[Fact, Origin], Optional[tuple[Fail, Origin]]]:
    """Worklist fixed point over (transition, fact) pairs.

    A fact at state q is pushed backwards across every transition entering
    q. `rng` shuffles seed, edge and worklist order (for confluence tests).
    """
    incoming: dict[str, list[Transition]] = {}
    for t in m.transitions:
        incoming.setdefault(t.target, []).append(t)
    if rng is not None:
        for lst in incoming.values():
            rng.shuffle(lst)
        seeds = list(seeds)
        rng.shuffle(seeds)
    origin: dict[Fact, Origin] = {}
    work: deque[Fact] = deque()
    failure: Optional[tuple[Fail, Origin]] = None

    def add(f: Union[Fact, Fail], o: Origin) -> bool:
        nonlocal failure
        if isinstance(f, Fail):
            if failure is None:
                failure = (f, o)
            return stop_at_fail
        if f in origin:
            return False
        origin[f] = o
        work.append(f)
        if fail_at(f) and failure is None:
            failure = (Fail(f[0]), Origin(fail_rule, None, f))
            return stop_at_fail
        return False

    for rule, t, f in seeds:
        if add(f, Origin(rule, t.index, None)):
            return origin, failure
    while work:
        if rng is not None:
            k = rng.randrange(len(work))
            work.rotate(-k)
        f = work.popleft()
        for t in incoming.get(f[0], []):
            for rule, concl in rules(t, f):
                if add(concl, Origin(rule, t.index, f)):
                    return origin, failure
    return origin, failure


def _chain(origin: dict[Fact, Origin], fail: tuple[Fail, Origin], show: Callable[[Fact], str]) -> tuple[DerivationStep, ...]:
    steps = []
    f_fail, o = fail
    steps.append(DerivationStep(o.rule, o.transition, (show(o.premise),) if o.premise else (), f"FAIL at {f_fail.state}"))
    f = o.premise
    while f is not None:
        o = origin[f]
        steps.append(DerivationStep(o.rule, o.transition, (show(o.premise),) if o.premise else (), show(f)))
        f = o.premise
    return tuple(reversed(steps))


def _path_to(m: RegisterMachine, target: str) -> list[int]:
    """Shortest transition path from the initial state, declaration order."""
    parent: dict[str, Optional[Transition]] = {m.initial: None}
    queue = deque([m.initial])
    while queue:
        q = queue.popleft()
        if q == target:
            break
        for t in m.outgoing(q):
            if t.target not in parent:
                parent[t.target] = t
                queue.append(t.target)
    path: list[int] = []
    q = target
    while parent[q] is not None:
        t = parent[q]
        path.append(t.index)  # type: ignore[union-attr]
        q = t.source  # type: ignore[union-attr]
    return path[::-1]


def _candidate(m: RegisterMachine, derivation: tuple[DerivationStep, ...], start: str) -> tuple[int, ...]:
    forward = [d.transition for d in reversed(derivation) if d.transition is not None]
    return tuple(_path_to(m, start) + forward)  # type: ignore[operator]


# --------------------------------------------------------- ghost reads


def _show_ghost(f: Fact) -> str:
    return f"regs({f[0]}) ∋ {f[1]}"


def _ghost_rules(t: Transition, f: Fact) -> Iterator[tuple[int, Fact]]:
    b = f[1]
    op = t.op
    if isinstance(op, Read):
        yield 5, (t.source, b)
    elif isinstance(op, Write):
        if op.reg != b:
            yield 6, (t.source, b)
    else:
        if b == op.src:
            yield 3, (t.source, b)
        elif b == op.dst:
            yield 4, (t.source, op.src)
        else:
            yield 7, (t.source, b)


def check_ghost_reads(m: RegisterMachine, *, stop_at_fail: bool = True, rng: Optional[random.Random] = None) -> StageVerdict:
    seeds = [(1, t, (t.source, t.op.reg)) for t in m.transitions if isinstance(t.op, Read)]
    origin, failure = _saturate(
        m, seeds, _ghost_rules, fail_at=lambda f: f[0] == m.initial, stop_at_fail=stop_at_fail, rng=rng
    )
    return _verdict("ghost", m, origin, failure, _show_ghost)


# --------------------------------------------------- mismatched variables


def _show_mismatch(f: Fact) -> str:
    return f"({f[1]}, {f[2]}) ∈ regs({f[0]})"


def _mismatch_rules(t: Transition, f: Fact) -> Iterator[tuple[int, Union[Fact, Fail]]]:
    q, b, x = f  # type: ignore[misc]
    op = t.op
    if isinstance(op, Read):
        yield 5, (t.source, b, x)
    elif isinstance(op, Write):
        if op.reg != b:
            yield 6, (t.source, b, x)
        elif op.var != x:
            yield 2, Fail(t.source)
    else:
        if b == op.src:
            yield 3, (t.source, b, x)
        elif b == op.dst:
            yield 4, (t.source, op.src, x)
        else:
            yield 7, (t.source, b, x)


def check_mismatched_vars(m: RegisterMachine, *, stop_at_fail: bool = True, rng: Optional[random.Random] = None) -> StageVerdict:
    seeds = [(1, t, (t.source, t.op.reg, t.op.var)) for t in m.transitions if isinstance(t.op, Read)]
    origin, failure = _saturate(m, seeds, _mismatch_rules, stop_at_fail=stop_at_fail, rng=rng)
    return _verdict("mismatch", m, origin, failure, _show_mismatch)


# ---------------------------------------------------------- hidden reads


def _show_sat(f: Fact) -> str:
    q, a, (kind, k), x, status = f  # type: ignore[misc]
    return f"{status}({q})<{a}, {'=' if kind == ALIAS else ''}{k}, {x}>"


ALIAS = "alias"  # tracker ("alias", b): the victim's value equals b's value


def _hidden_rules(t: Transition, f: Fact) -> Iterator[tuple[int, Union[Fact, Fail]]]:
    _, a, tracker, x, status = f  # type: ignore[misc]
    kind, k = tracker
    q0 = t.source
    op = t.op
    if kind == ALIAS:
        yield from _alias_rules(t, a, k, x)
        return
    if isinstance(op, Read):
        th, y, b = op.thread, op.var, op.reg
        yield 8, (q0, a, tracker, x, status)
        if kind == "thread" and k == th:
            if y != x and b != a:
                yield 2, (q0, a, ("reg", b), x, status)
            if y == x and b != a:
                yield 5, (q0, a, ("reg", b), x, HIDDEN)
            if y == x and status == HIDDEN:
                yield 6, (q0, a, (ALIAS, b), x, HIDDEN)
    elif isinstance(op, Write):
        th, y, c = op.thread, op.var, op.reg
        if c != a and not (kind == "reg" and k == c):
            yield 8, (q0, a, tracker, x, status)
        if kind == "reg" and k == c and y != x and c != a:
            yield 3, (q0, a, ("thread", th), x, status)
        if y == x and c != a and ((kind == "thread" and k == th) or (kind == "reg" and k == c)):
            yield 4, (q0, a, ("thread", th), x, HIDDEN)
        if y == x and c == a and status == HIDDEN and kind == "thread" and k == th:
            yield 7, Fail(q0)
    else:
        dst, src = op.dst, op.src
        a2 = src if a == dst else a
        t2 = ("reg", src) if kind == "reg" and k == dst else tracker
        if not (t2[0] == "reg" and t2[1] == a2):
            # a merged pair would make the victim read its own intervening write
            yield 9, (q0, a2, t2, x, status)


def _alias_rules(t: Transition, a: str, b: str, x: str) -> Iterator[tuple[int, Union[Fact, Fail]]]:
    op = t.op
    q0 = t.source
    if isinstance(op, Read):
        yield 8, (q0, a, (ALIAS, b), x, HIDDEN)
    elif isinstance(op, Write):
        if op.reg not in (a, b):
            yield 8, (q0, a, (ALIAS, b), x, HIDDEN)
        elif a == b and op.var == x:
            yield 7, Fail(q0)
    else:
        sub = lambda r: op.src if r == op.dst else r
        yield 9, (q0, sub(a), (ALIAS, sub(b)), x, HIDDEN)


def check_hidden_reads(m: RegisterMachine, *, stop_at_fail: bool = True, rng: Optional[random.Random] = None) -> StageVerdict:
    seeds = [
        (1, t, (t.source, t.op.reg, ("thread", t.op.thread), t.op.var, VISIBLE))
        for t in m.transitions
        if isinstance(t.op, Read)
    ]
    origin, failure = _saturate(
        m,
        seeds,
        _hidden_rules,
        fail_at=lambda f: f[0] == m.initial and f[2][0] == ALIAS,
        fail_rule=10,
        stop_at_fail=stop_at_fail,
        rng=rng,
    )
    return _verdict("hidden", m, origin, failure, _show_sat)


def fact_bound(m: RegisterMachine) -> int:
    return 2 * len(m.states) * len(m.vars) * len(m.regs) * (len(m.threads) + len(m.regs))


# -------------------------------------------------------------- verdicts


def _verdict(stage, m, origin, failure, show) -> StageVerdict:
    facts = frozenset(origin)
    if failure is None:
        return StageVerdict(stage, True, len(origin), facts=facts)
    derivation = _chain(origin, failure, show)
    fail_state = failure[0].state
    cand = _candidate(m, derivation, fail_state)
    trace = cand if _validates(m, stage, cand) else None
    return StageVerdict(stage, False, len(origin), fail_state, derivation, trace, facts)


def _validates(m: RegisterMachine, stage: str, trace: tuple[int, ...]) -> bool:
    from .egraph import GraphError, check_wra, graph_of_run

    try:
        run = run_trace(m, trace)
    except ValueError:
        return False
    if not run.steps:
        return False
    last = run.steps[-1]
    if stage == "ghost":
        return isinstance(last.transition.op, Read) and last.observed is INIT
    if stage == "mismatch":
        return mismatched_read(m, run) is not None
    try:
        return check_wra(graph_of_run(run, m.vars)) is not None
    except GraphError:
        return False


def mismatched_read(m: RegisterMachine, run: Run) -> Optional[int]:
    """Position of the first read outputting a value written on another
    variable, if any."""
    written_on = {}
    for i, s in enumerate(run.steps):
        op = s.transition.op
        if isinstance(op, Write):
            written_on[s.observed] = op.var
        elif isinstance(op, Read) and s.observed is not INIT and written_on[s.observed] != op.var:
            return i
    return None


@dataclass(frozen=True)
class WRAResult:
    machine: RegisterMachine
    stages: tuple[StageVerdict, ...]
    passed: bool
    failed_stage: Optional[str]
    strict_init: bool

    def stage(self, name: str) -> Optional[StageVerdict]:
        return next((s for s in self.stages if s.stage == name), None)


def verify_wra(m: RegisterMachine, *, strict_init: bool = False) -> WRAResult:
    """Prune, then ghost -> mismatch -> hidden, stopping at the first
    blocking failure.

    Reading a never-written register observes the initial value, which the
    graph semantics binds to the initial write of the read's variable. So
    by default the ghost stage is reported but does not block; with
    `strict_init` it fails the machine, as required when registers are
    assumed uninitialised.
    """
    m = prune_unreachable(m)
    stages = []
    ghost = check_ghost_reads(m)
    stages.append(ghost)
    if not ghost.passed and strict_init:
        return WRAResult(m, tuple(stages), False, "ghost", strict_init)
    for check in (check_mismatched_vars, check_hidden_reads):
        v = check(m)
        stages.append(v)
        if not v.passed:
            return WRAResult(m, tuple(stages), False, v.stage, strict_init)
    return WRAResult(m, tuple(stages), True, None, strict_init)


# --------------------------------------------------------------- explain


class NothingToExplain(ValueError):
    pass


def explain(v: StageVerdict, m: Optional[RegisterMachine] = None, depth: Optional[int] = None) -> dict:
    """Linearized derivation plus, when one can be confirmed, a concrete
    violating run (as trace-file lines)."""
    if v.passed:
        raise NothingToExplain("nothing to explain: stage passed")
    out = {
        "stage": v.stage,
        "verdict": v.verdict,
        "facts_count": v.facts_count,
        "flagged_state": v.flagged_state,
        "derivation": [d.to_json() for d in v.derivation],
    }
    if m is None:
        return out
    trace = v.witness_trace
    if trace is None and v.stage == "hidden":
        from .explore import default_depth, find_violation

        ev = find_violation(m, "wra", depth or default_depth(m))
        trace = ev.trace if ev.violated else None
    if trace is not None:
        run = run_trace(m, trace)
        out["witness_trace"] = list(trace)
        out["witness_run"] = [a.line() for a in run.actions()]
    return out


def render_derivation(v: StageVerdict, m: Optional[RegisterMachine] = None) -> str:
    lines = []
    for i, d in enumerate(v.derivation, start=1):
        where = ""
        if d.transition is not None:
            where = f" on t{d.transition}"
            if m is not None:
                where += f" ({m.transitions[d.transition]})"
        lines.append(f"{i}. rule {d.rule}{where}: {d.produced}")
    return "\n".join(lines)
