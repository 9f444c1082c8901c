"""Formula-to-machine reductions and the litmus corpus.

A clause gadget gives each clause i a thread th_i and registers a_i, b_i.
The init phase makes every thread write x twice (into b_{i-1}, then a_i);
the assignment phase copies b_i into a_i for each clause the chosen
assignment marks; the read phase has th_i read x from a_i. When every
clause has been copied, each th_i reads its predecessor's first write after
its own second write, and the co edges close a cycle through all clauses.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .machine import Copy, Read, RegisterMachine, Write, make_machine

Literal = tuple[str, bool]  # (variable, positive?)
PAD_THREAD, PAD_VAR, PAD_REG = "pad", "xpad", "rpad"
MAX_BRUTE_VARS = 20


class FormulaError(ValueError):
    pass


@dataclass(frozen=True)
class Formula:
    clauses: tuple[tuple[Literal, ...], ...]
    form: str  # "dnf" or "cnf"

    def __post_init__(self) -> None:
        if self.form not in ("dnf", "cnf"):
            raise FormulaError(f"unknown form {self.form}")
        if not self.clauses:
            raise FormulaError("empty formula")
        for c in self.clauses:
            if not c:
                raise FormulaError("empty clause")
            if len(c) > 3:
                raise FormulaError("clauses hold at most 3 literals")

    @property
    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for c in self.clauses:
            for v, _ in c:
                seen.setdefault(v, None)
        return list(seen)

    def __str__(self) -> str:
        inner, outer = (" & ", " | ") if self.form == "dnf" else (" | ", " & ")
        lit = lambda l: l[0] if l[1] else "!" + l[0]
        return outer.join(inner.join(map(lit, c)) if len(c) == 1 else "(" + inner.join(map(lit, c)) + ")" for c in self.clauses)


_LIT_RE = re.compile(r"^(!*)\s*([A-Za-z_][A-Za-z0-9_]*)$")


def parse_formula(text: str, form: str) -> Formula:
    """DNF: clauses split by '|', literals by '&'. CNF: the other way round."""
    outer, inner = ("|", "&") if form == "dnf" else ("&", "|")
    clauses = []
    for raw in text.split(outer):
        raw = raw.strip()
        if raw.startswith("(") and raw.endswith(")"):
            raw = raw[1:-1]
        lits = []
        for tok in raw.split(inner):
            m = _LIT_RE.match(tok.strip())
            if not m:
                raise FormulaError(f"bad literal {tok.strip()!r}")
            lits.append((m.group(2), len(m.group(1)) % 2 == 0))
        clauses.append(tuple(lits))
    return Formula(tuple(clauses), form)


def eval_formula(f: Formula, assignment: Mapping[str, bool]) -> bool:
    lit = lambda l: assignment[l[0]] == l[1]
    if f.form == "dnf":
        return any(all(map(lit, c)) for c in f.clauses)
    return all(any(map(lit, c)) for c in f.clauses)


@dataclass(frozen=True)
class BruteForce:
    tautology: bool
    satisfiable: bool
    witness: Optional[dict]  # falsifying assignment (dnf) / satisfying one (cnf)


def brute_force(f: Formula) -> BruteForce:
    vs = sorted(f.variables)
    if len(vs) > MAX_BRUTE_VARS:
        raise FormulaError(f"too many variables ({len(vs)} > {MAX_BRUTE_VARS})")
    falsifier = satisfier = None
    for bits in itertools.product((True, False), repeat=len(vs)):
        a = dict(zip(vs, bits))
        if eval_formula(f, a):
            satisfier = satisfier or a
        else:
            falsifier = falsifier or a
    witness = falsifier if f.form == "dnf" else satisfier
    return BruteForce(falsifier is None, satisfier is not None, witness)


# ------------------------------------------------------------ gadgets


def _gadget(f: Formula, copy_when: Callable[[Literal, bool], bool], name: str) -> RegisterMachine:
    n = len(f.clauses)
    th = [f"th{i}" for i in range(n)]
    a = [f"a{i}" for i in range(n)]
    b = [f"b{i}" for i in range(n)]
    eps = Write(PAD_THREAD, PAD_VAR, PAD_REG)
    edges = []
    counter = itertools.count()
    fresh = lambda: f"q{next(counter)}"
    cur = fresh()
    init = cur

    def go(op, target=None):
        nonlocal cur
        nxt = target or fresh()
        edges.append((cur, nxt, op))
        cur = nxt

    for i in range(n):
        go(Write(th[i], "x", b[(i - 1) % n]))
        go(Write(th[i], "x", a[i]))
    for v in f.variables:
        entry = cur
        join = None
        for value in (True, False):
            cur = entry
            go(eps)
            for i, clause in enumerate(f.clauses):
                if any(l[0] == v and copy_when(l, value) for l in clause):
                    go(Copy(a[i], b[i]))
            if join is None:
                go(eps)
                join = cur
            else:
                go(eps, join)
    for i in range(n):
        go(Read(th[i], "x", a[i]))
    regs = [r for pair in zip(a, b) for r in pair] + [PAD_REG]
    return make_machine(name, th + [PAD_THREAD], ["x", PAD_VAR], regs, init, edges)


def tautology_to_machine(f: Formula) -> RegisterMachine:
    """RA violation exists iff f (DNF) is not a tautology. Choosing v
    copies every clause the choice falsifies."""
    if f.form != "dnf":
        raise FormulaError("tautology gadget needs a DNF formula")
    return _gadget(f, lambda lit, value: lit[1] != value, "taut")


def sat_to_machine(f: Formula) -> RegisterMachine:
    """RA violation exists iff f (CNF) is satisfiable. Choosing v copies
    every clause the choice satisfies."""
    if f.form != "cnf":
        raise FormulaError("SAT gadget needs a CNF formula")
    return _gadget(f, lambda lit, value: lit[1] == value, "sat")


def random_formula(rng: random.Random, n_vars: int, n_clauses: int, form: str, width: int = 3) -> Formula:
    vs = [f"v{i}" for i in range(n_vars)]
    clauses = []
    for _ in range(n_clauses):
        k = rng.randint(1, min(width, n_vars))
        chosen = rng.sample(vs, k)
        clauses.append(tuple((v, rng.random() < 0.5) for v in chosen))
    return Formula(tuple(clauses), form)


def all_small_formulas(form: str, max_vars: int = 2, max_clauses: int = 2) -> list[Formula]:
    """Every formula whose clauses are non-empty sets of literals over
    v0..v{max_vars-1} (no variable twice in a clause)."""
    vs = [f"v{i}" for i in range(max_vars)]
    clause_set = []
    for k in range(1, max_vars + 1):
        for chosen in itertools.combinations(vs, k):
            for signs in itertools.product((True, False), repeat=k):
                clause_set.append(tuple(zip(chosen, signs)))
    out = []
    for n in range(1, max_clauses + 1):
        for combo in itertools.product(clause_set, repeat=n):
            out.append(Formula(tuple(combo), form))
    return out


# ------------------------------------------------------------- litmus


@dataclass(frozen=True)
class LitmusSpec:
    name: str
    expected: str  # none | wra | ra | sra
    builder: Callable[[], RegisterMachine]
    doc: str


def _chain(name, threads, vars, regs, ops, branches: Iterable[tuple[int, list]] = ()) -> RegisterMachine:
    """Straight-line machine q0 -> q1 -> ... plus optional alternative
    suffixes: (k, ops) adds a branch leaving state q_k."""
    edges = [(f"q{i}", f"q{i + 1}", op) for i, op in enumerate(ops)]
    fresh = itertools.count(len(ops) + 1)
    for k, alt in branches:
        src = f"q{k}"
        for op in alt:
            dst = f"q{next(fresh)}"
            edges.append((src, dst, op))
            src = dst
    return make_machine(name, threads, vars, regs, "q0", edges)


W, R = Write, Read


def _mp():
    # writer: x:=a, x:=b, y:=c; reader sees c then may read the stale a
    ops = [W("t1", "x", "a"), W("t1", "x", "b"), W("t1", "y", "c"), R("t2", "y", "c"), R("t2", "x", "a")]
    return _chain("mp", ["t1", "t2"], ["x", "y"], ["a", "b", "c"], ops, [(4, [R("t2", "x", "b")])])


def _mp_trans():
    ops = [
        W("t1", "x", "a"), W("t1", "x", "b"), W("t1", "y", "c"),
        R("t2", "y", "c"), W("t2", "z", "d"),
        R("t3", "z", "d"), R("t3", "x", "a"),
    ]
    return _chain("mp_trans", ["t1", "t2", "t3"], ["x", "y", "z"], ["a", "b", "c", "d"], ops)


def _sb():
    # both threads miss the other's store: allowed by every model here
    ops = [
        W("t0", "x", "i"), W("t0", "y", "j"),
        W("t1", "x", "a"), W("t2", "y", "b"),
        R("t1", "y", "j"), R("t2", "x", "i"),
    ]
    return _chain("sb", ["t0", "t1", "t2"], ["x", "y"], ["i", "j", "a", "b"], ops, [(5, [R("t2", "x", "a")])])


def _sf():
    # store forwarding: each thread first sees its own store, then the
    # threads disagree on the order of the two stores
    ops = [W("t1", "x", "a"), W("t2", "x", "b"), R("t1", "x", "a"), R("t1", "x", "b"), R("t2", "x", "a")]
    return _chain("sf", ["t1", "t2"], ["x"], ["a", "b"], ops)


def _ww():
    ops = [W("t1", "x", "a"), W("t1", "x", "a"), W("t2", "x", "b"), R("t2", "x", "a"), R("t1", "x", "b")]
    return _chain("ww", ["t1", "t2"], ["x"], ["a", "b"], ops)


def _ww_mp():
    # two writes on x then a flag; the reader sees the newest x
    ops = [W("t1", "x", "a"), W("t1", "x", "b"), W("t1", "y", "c"), R("t2", "y", "c"), R("t2", "x", "b")]
    return _chain("ww_mp", ["t1", "t2"], ["x", "y"], ["a", "b", "c"], ops, [(3, [R("t2", "x", "b")])])


def _two_plus_two_w():
    ops = [
        W("t1", "x", "a1"), W("t1", "y", "b1"),
        W("t2", "y", "b2"), W("t2", "x", "a2"),
        R("t2", "x", "a1"), R("t1", "y", "b2"),
    ]
    return _chain("two_plus_two_w", ["t1", "t2"], ["x", "y"], ["a1", "b1", "a2", "b2"], ops, [(4, [R("t1", "y", "b2")])])


def _oscillating():
    # three threads each write two variables; every variable's coherence
    # goes "backwards" once, closing a cycle across x, y and z
    ops = [
        W("t1", "x", "a1"), W("t1", "y", "b1"),
        W("t2", "y", "b2"), W("t2", "z", "c2"),
        W("t3", "z", "c3"), W("t3", "x", "a3"),
        R("t3", "x", "a1"), R("t1", "y", "b2"), R("t2", "z", "c3"),
    ]
    return _chain(
        "oscillating", ["t1", "t2", "t3"], ["x", "y", "z"], ["a1", "b1", "b2", "c2", "c3", "a3"], ops
    )


def _ooo_reads():
    # two readers observe two independent stores to x in opposite orders
    ops = [
        W("t1", "x", "a"), W("t2", "x", "b"),
        R("t3", "x", "a"), R("t3", "x", "b"),
        R("t4", "x", "b"), R("t4", "x", "a"),
    ]
    return _chain("out_of_order_reads", ["t1", "t2", "t3", "t4"], ["x"], ["a", "b"], ops)


LITMUS: dict[str, LitmusSpec] = {
    s.name: s
    for s in (
        LitmusSpec("mp", "wra", _mp, "message passing: stale read after observing the flag"),
        LitmusSpec("mp-trans", "wra", _mp_trans, "message passing through an intermediate thread"),
        LitmusSpec("sb", "none", _sb, "store buffering: both reads miss the other thread's store"),
        LitmusSpec("sf", "ra", _sf, "store forwarding, then disagreement on the order of two stores"),
        LitmusSpec("ww", "ra", _ww, "two writers each read the other's write last"),
        LitmusSpec("ww-mp", "none", _ww_mp, "message passing where the reader sees the newest write"),
        LitmusSpec("2+2w", "sra", _two_plus_two_w, "two threads write x and y in opposite orders"),
        LitmusSpec("oscillating", "sra", _oscillating, "coherence cycle spread over three variables"),
        LitmusSpec("out-of-order-reads", "ra", _ooo_reads, "two readers see two stores in opposite orders"),
    )
}


def litmus(name: str) -> RegisterMachine:
    try:
        return LITMUS[name].builder()
    except KeyError:
        raise KeyError(f"unknown litmus test {name!r}; known: {', '.join(LITMUS)}") from None
