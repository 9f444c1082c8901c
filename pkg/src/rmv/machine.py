"""Register machines: types, text format, and operational semantics."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Optional, Union

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_IDENT_RE = re.compile(rf"^{IDENT}$")


# ---------------------------------------------------------------- values


class Init:
    """The shared initial register value (integer 0 in trace files)."""

    _instance: Optional["Init"] = None

    def __new__(cls) -> "Init":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Init"

    def __reduce__(self):
        return (Init, ())


INIT = Init()


@dataclass(frozen=True, order=True)
class WriteToken:
    n: int

    def __repr__(self) -> str:
        return f"#{self.n}"


Value = Union[Init, WriteToken]


def value_to_int(v: Value) -> int:
    return 0 if v is INIT else v.n  # type: ignore[union-attr]


def int_to_value(n: int) -> Value:
    return INIT if n == 0 else WriteToken(n)


# ------------------------------------------------------------ operations


@dataclass(frozen=True)
class Write:
    thread: str
    var: str
    reg: str

    def __str__(self) -> str:
        return f"W({self.thread}, {self.var}, {self.reg})"


@dataclass(frozen=True)
class Read:
    thread: str
    var: str
    reg: str

    def __str__(self) -> str:
        return f"R({self.thread}, {self.var}, {self.reg})"


@dataclass(frozen=True)
class Copy:
    """dst := src"""

    dst: str
    src: str

    def __str__(self) -> str:
        return f"C({self.dst}, {self.src})"


Operation = Union[Write, Read, Copy]


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    op: Operation
    index: int

    def __str__(self) -> str:
        return f"{self.source} -> {self.target} : {self.op}"


class MachineError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterMachine:
    name: str
    threads: tuple[str, ...]
    vars: tuple[str, ...]
    regs: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    states: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.states:
            object.__setattr__(self, "states", _state_order(self.initial, self.transitions))
        self._validate()

    def _validate(self) -> None:
        for kind, names in (("thread", self.threads), ("variable", self.vars), ("register", self.regs)):
            if len(set(names)) != len(names):
                raise MachineError(f"duplicate {kind} declaration")
        if self.initial not in self.states:
            raise MachineError(f"initial state {self.initial} is not a state")
        states = set(self.states)
        threads, xs, regs = set(self.threads), set(self.vars), set(self.regs)
        for i, t in enumerate(self.transitions):
            if t.index != i:
                raise MachineError("transition indices must follow declaration order")
            if t.source not in states or t.target not in states:
                raise MachineError(f"transition {t} uses an undeclared state")
            op = t.op
            if isinstance(op, Copy):
                used_regs = (op.dst, op.src)
                if op.dst == op.src:
                    raise MachineError(f"copy {op} has identical registers")
            else:
                if op.thread not in threads:
                    raise MachineError(f"undeclared thread {op.thread}")
                if op.var not in xs:
                    raise MachineError(f"undeclared variable {op.var}")
                used_regs = (op.reg,)
            for r in used_regs:
                if r not in regs:
                    raise MachineError(f"undeclared register {r}")

    def outgoing(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]

    def is_acyclic(self) -> bool:
        return longest_path(self) is not None


def _state_order(initial: str, transitions: Iterable[Transition]) -> tuple[str, ...]:
    seen = {initial: None}
    for t in transitions:
        seen.setdefault(t.source, None)
        seen.setdefault(t.target, None)
    return tuple(seen)


def make_machine(
    name: str,
    threads: Iterable[str],
    vars: Iterable[str],
    regs: Iterable[str],
    initial: str,
    edges: Iterable[tuple[str, str, Operation]],
) -> RegisterMachine:
    ts = tuple(Transition(s, d, op, i) for i, (s, d, op) in enumerate(edges))
    return RegisterMachine(name, tuple(threads), tuple(vars), tuple(regs), initial, ts)


# ---------------------------------------------------------- text format


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.msg, self.line, self.col = msg, line, col


_HEADERS = ("machine", "threads", "vars", "regs", "init")
_TRANS_RE = re.compile(
    rf"^\s*({IDENT})\s*->\s*({IDENT})\s*:\s*([WRC])\s*\(\s*({IDENT})\s*,\s*({IDENT})\s*(?:,\s*({IDENT})\s*)?\)\s*$"
)


def parse_machine(text: Union[str, bytes]) -> RegisterMachine:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    header: dict[str, list[str]] = {}
    edges: list[tuple[str, str, Operation]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        words = line.split()
        if words[0] in _HEADERS and "->" not in line:
            key = words[0]
            if edges:
                raise ParseError(f"header '{key}' after the first transition", lineno, col)
            if key in header:
                what = "duplicate state in init" if key == "init" else f"duplicate '{key}' header"
                raise ParseError(what, lineno, col)
            args = words[1:]
            for a in args:
                if not _IDENT_RE.match(a):
                    raise ParseError(f"bad identifier '{a}'", lineno, line.index(a) + 1)
            if key in ("machine", "init") and len(args) != 1:
                raise ParseError(f"'{key}' takes exactly one identifier", lineno, col)
            header[key] = args
            continue
        m = _TRANS_RE.match(line)
        if not m:
            raise ParseError("syntax error: expected 'FROM -> TO : OP(...)'", lineno, _syntax_col(line))
        src, dst, kind, a1, a2, a3 = m.groups()
        if kind == "C":
            if a3 is not None:
                raise ParseError("C takes two registers", lineno, m.start(6) + 1)
            op: Operation = Copy(a1, a2)
        else:
            if a3 is None:
                raise ParseError(f"{kind} takes thread, variable and register", lineno, m.start(3) + 1)
            op = Write(a1, a2, a3) if kind == "W" else Read(a1, a2, a3)
        _check_declared(op, header, lineno, m)
        edges.append((src, dst, op))
    if "init" not in header:
        raise ParseError("missing 'init' header", 1, 1)
    try:
        return make_machine(
            header.get("machine", ["machine"])[0],
            header.get("threads", []),
            header.get("vars", []),
            header.get("regs", []),
            header["init"][0],
            edges,
        )
    except MachineError as e:
        raise ParseError(str(e), 1, 1) from None


def _syntax_col(line: str) -> int:
    # first position where the transition shape stops matching
    pieces = [rf"\s*{IDENT}", r"\s*->", rf"\s*{IDENT}", r"\s*:", r"\s*[WRC]", r"\s*\("]
    pos = 0
    for p in pieces:
        m = re.compile(p).match(line, pos)
        if not m:
            break
        pos = m.end()
    while pos < len(line) and line[pos].isspace():
        pos += 1
    return pos + 1


def _check_declared(op: Operation, header: Mapping[str, list[str]], lineno: int, m: re.Match) -> None:
    regs = header.get("regs", [])
    if isinstance(op, Copy):
        checks = [("register", op.dst, regs, 4), ("register", op.src, regs, 5)]
    else:
        checks = [
            ("thread", op.thread, header.get("threads", []), 4),
            ("variable", op.var, header.get("vars", []), 5),
            ("register", op.reg, regs, 6),
        ]
    for kind, name, declared, group in checks:
        if name not in declared:
            raise ParseError(f"undeclared {kind} '{name}'", lineno, m.start(group) + 1)


def print_machine(m: RegisterMachine) -> str:
    out = [f"machine {m.name}"]
    for key, names in (("threads", m.threads), ("vars", m.vars), ("regs", m.regs)):
        if names:
            out.append(f"{key} {' '.join(names)}")
    out.append(f"init {m.initial}")
    out.extend(str(t) for t in m.transitions)
    return "\n".join(out) + "\n"


# ------------------------------------------------------ graph structure


def reachable_states(m: RegisterMachine) -> list[str]:
    seen = {m.initial}
    order = [m.initial]
    queue = deque([m.initial])
    succ: dict[str, list[str]] = {}
    for t in m.transitions:
        succ.setdefault(t.source, []).append(t.target)
    while queue:
        q = queue.popleft()
        for nxt in succ.get(q, []):
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order


def prune_unreachable(m: RegisterMachine) -> RegisterMachine:
    keep = set(reachable_states(m))
    if keep == set(m.states):
        return m
    edges = [(t.source, t.target, t.op) for t in m.transitions if t.source in keep]
    return make_machine(m.name, m.threads, m.vars, m.regs, m.initial, edges)


def longest_path(m: RegisterMachine) -> Optional[int]:
    """Length of the longest path from the initial state, or None when a
    cycle is reachable."""
    succ: dict[str, list[str]] = {}
    for t in m.transitions:
        succ.setdefault(t.source, []).append(t.target)
    memo: dict[str, int] = {}
    on_stack: set[str] = set()

    def visit(q: str) -> Optional[int]:
        if q in memo:
            return memo[q]
        if q in on_stack:
            return None
        on_stack.add(q)
        best = 0
        for nxt in succ.get(q, []):
            sub = visit(nxt)
            if sub is None:
                return None
            best = max(best, sub + 1)
        on_stack.discard(q)
        memo[q] = best
        return best

    import sys

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(m.states) + 100))
    try:
        return visit(m.initial)
    finally:
        sys.setrecursionlimit(limit)


def longest_simple_path(m: RegisterMachine, ceiling: int) -> int:
    """Longest simple path (no repeated state) from the initial state,
    stopping early once `ceiling` is reached."""
    exact = longest_path(m)
    if exact is not None:
        return exact
    succ: dict[str, list[str]] = {}
    for t in m.transitions:
        succ.setdefault(t.source, []).append(t.target)
    best = 0
    visited = {m.initial}
    stack = [(m.initial, iter(succ.get(m.initial, [])))]
    while stack and best < ceiling:
        q, it = stack[-1]
        nxt = next(it, None)
        if nxt is None:
            stack.pop()
            visited.discard(q)
            continue
        if nxt in visited:
            continue
        visited.add(nxt)
        stack.append((nxt, iter(succ.get(nxt, []))))
        best = max(best, len(stack) - 1)
    return min(best, ceiling)


def reactivity_gaps(m: RegisterMachine) -> list[tuple[str, str, str, str]]:
    """Lint: (state, kind, thread, var) requests a state cannot accept.
    A reactive machine has none."""
    gaps = []
    for q in m.states:
        accepted = {(type(t.op).__name__, t.op.thread, t.op.var) for t in m.outgoing(q) if not isinstance(t.op, Copy)}
        for kind in ("Write", "Read"):
            for th in m.threads:
                for x in m.vars:
                    if (kind, th, x) not in accepted:
                        gaps.append((q, kind, th, x))
    return gaps


# ------------------------------------------------------------ semantics


@dataclass(frozen=True)
class Configuration:
    state: str
    regvals: Mapping[str, Value]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Configuration) and self.state == other.state and dict(self.regvals) == dict(other.regvals)

    def __hash__(self) -> int:
        return hash((self.state, tuple(sorted(self.regvals.items(), key=lambda kv: kv[0]))))


def initial_config(m: RegisterMachine) -> Configuration:
    return Configuration(m.initial, {r: INIT for r in m.regs})


def enabled(m: RegisterMachine, c: Configuration) -> list[Transition]:
    return m.outgoing(c.state)


def fresh_tokens(start: int = 1) -> Callable[[], WriteToken]:
    counter = iter(range(start, 1 << 62))
    return lambda: WriteToken(next(counter))


def step(
    m: RegisterMachine, c: Configuration, t: Transition, fresh: Callable[[], Value]
) -> tuple[Configuration, Optional[Value]]:
    if t.source != c.state:
        raise MachineError(f"transition {t} does not leave state {c.state}")
    regs = dict(c.regvals)
    op = t.op
    if isinstance(op, Write):
        v = fresh()
        regs[op.reg] = v
        return Configuration(t.target, regs), v
    if isinstance(op, Read):
        return Configuration(t.target, regs), regs[op.reg]
    regs[op.dst] = regs[op.src]
    return Configuration(t.target, regs), None


@dataclass(frozen=True)
class Step:
    before: Configuration
    transition: Transition
    observed: Optional[Value]
    after: Configuration


@dataclass(frozen=True)
class Run:
    steps: tuple[Step, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Step]:
        return iter(self.steps)

    @property
    def trace(self) -> tuple[int, ...]:
        return tuple(s.transition.index for s in self.steps)

    def actions(self) -> list["Action"]:
        out = []
        for s in self.steps:
            op = s.transition.op
            if isinstance(op, Copy):
                out.append(Action("C", None, None, None, None, op.dst, op.src))
            else:
                kind = "W" if isinstance(op, Write) else "R"
                out.append(Action(kind, op.thread, op.var, op.reg, s.observed))
        return out


def run_trace(m: RegisterMachine, trace: Iterable[int]) -> Run:
    """Execute transition indices from the initial configuration."""
    fresh = fresh_tokens()
    c = initial_config(m)
    steps = []
    for idx in trace:
        if not 0 <= idx < len(m.transitions):
            raise MachineError(f"no transition with index {idx}")
        t = m.transitions[idx]
        if t.source != c.state:
            raise MachineError(f"broken chain: transition {idx} does not leave {c.state}")
        nxt, obs = step(m, c, t, fresh)
        steps.append(Step(c, t, obs, nxt))
        c = nxt
    return Run(tuple(steps))


# --------------------------------------------------------------- traces


@dataclass(frozen=True)
class Action:
    """One trace line: a write/read (thread, var, reg, value) or a copy."""

    kind: str
    thread: Optional[str]
    var: Optional[str]
    reg: Optional[str]
    value: Optional[Value]
    dst: Optional[str] = None
    src: Optional[str] = None

    def line(self) -> str:
        if self.kind == "C":
            return f"C {self.dst} {self.src}"
        return f"{self.kind} {self.thread} {self.var} {self.reg} {value_to_int(self.value)}"  # type: ignore[arg-type]


class TraceError(ValueError):
    pass


def parse_trace(text: Union[str, bytes]) -> list[Action]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    out: list[Action] = []
    written: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        kind = words[0]
        if kind == "C" and len(words) == 3 and all(_IDENT_RE.match(w) for w in words[1:]):
            out.append(Action("C", None, None, None, None, words[1], words[2]))
            continue
        if kind not in ("W", "R") or len(words) != 5 or not all(_IDENT_RE.match(w) for w in words[1:4]):
            raise TraceError(f"line {lineno}: expected 'W|R THREAD VAR REG VALUE' or 'C DST SRC'")
        try:
            n = int(words[4])
        except ValueError:
            raise TraceError(f"line {lineno}: value '{words[4]}' is not an integer") from None
        if n < 0:
            raise TraceError(f"line {lineno}: negative value")
        if kind == "W":
            if n == 0:
                raise TraceError(f"line {lineno}: value 0 is reserved for the initial value")
            if n in written:
                raise TraceError(f"line {lineno}: duplicate write value {n} (trace not differentiated)")
            written.add(n)
        out.append(Action(kind, words[1], words[2], words[3], int_to_value(n)))
    return out


def trace_text(actions: Iterable[Action]) -> str:
    return "".join(a.line() + "\n" for a in actions)


def match_trace(m: RegisterMachine, actions: list[Action]) -> Run:
    """Find a run of `m` producing exactly the given trace lines.

    Register contents are fixed by the trace values; only the control
    state is nondeterministic, so a set of candidate states is tracked.
    """
    regs: dict[str, Value] = {r: INIT for r in m.regs}
    frontier: dict[str, list[Step]] = {m.initial: []}
    for n, a in enumerate(actions, start=1):
        nxt: dict[str, list[Step]] = {}
        before_regs = dict(regs)
        if a.kind == "C":
            if a.dst not in regs or a.src not in regs:
                raise TraceError(f"step {n}: undeclared register")
            regs[a.dst] = regs[a.src]  # type: ignore[index]
        elif a.kind == "W":
            if a.reg not in regs:
                raise TraceError(f"step {n}: undeclared register {a.reg}")
            regs[a.reg] = a.value  # type: ignore[index,assignment]
        else:
            if a.reg not in regs:
                raise TraceError(f"step {n}: undeclared register {a.reg}")
            if regs[a.reg] != a.value:  # type: ignore[index]
                raise TraceError(f"step {n}: register {a.reg} holds {value_to_int(regs[a.reg])}, not {value_to_int(a.value)}")  # type: ignore[index,arg-type]
        for q, path in frontier.items():
            for t in m.outgoing(q):
                if _op_matches(t.op, a) and t.target not in nxt:
                    obs = None if a.kind == "C" else a.value
                    st = Step(Configuration(q, before_regs), t, obs, Configuration(t.target, dict(regs)))
                    nxt[t.target] = path + [st]
        if not nxt:
            raise TraceError(f"step {n} ('{a.line()}') is not enabled: trace is not a run of machine {m.name}")
        frontier = nxt
    first = next(iter(frontier.values()))
    return Run(tuple(first))


def _op_matches(op: Operation, a: Action) -> bool:
    if isinstance(op, Copy):
        return a.kind == "C" and op.dst == a.dst and op.src == a.src
    kind = "W" if isinstance(op, Write) else "R"
    return a.kind == kind and (op.thread, op.var, op.reg) == (a.thread, a.var, a.reg)
