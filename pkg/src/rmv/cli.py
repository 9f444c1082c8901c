"""Command-line interface: check, run, gadget, litmus.

Exit codes: 0 consistent, 1 violation, 2 usage/input error, 3 no violation
found but the search was bounded (inconclusive).
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
import time
from typing import Optional, Sequence

from . import __version__
from .egraph import GraphError, check, graph_of_actions, graph_of_run, graph_to_dot, graph_to_json
from .explore import MismatchedRead, default_depth, find_violation
from .gadgets import LITMUS, FormulaError, litmus, parse_formula, sat_to_machine, tautology_to_machine
from .machine import ParseError, TraceError, match_trace, parse_machine, parse_trace, print_machine, run_trace
from .saturation import render_derivation, verify_wra

SCHEMA = "rmv-report/1"
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_INCONCLUSIVE = 0, 1, 2, 3
ORDER = ("wra", "ra", "sra")


class InputError(Exception):
    pass


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None


def _load_machine(path: str):
    data = _read(path)
    try:
        return parse_machine(data.decode("utf-8")), data
    except (ParseError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: {e}") from None


def _wanted(model: str) -> tuple[str, ...]:
    return ORDER if model == "all" else (model,)


def _emit(report: dict, args, text: list[str], started: float) -> None:
    report["timestamp"] = {
        "utc": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "elapsed_ms": round((time.perf_counter() - started) * 1000, 3),
    }
    if args.json:
        print(json.dumps(report, indent=2, ensure_ascii=False))
    elif not args.quiet:
        print("\n".join(text))
    else:
        print(text[-1])


def _counterexample(model: str, run, graph, witness) -> dict:
    return {
        "model": model,
        "transitions": list(run.trace),
        "trace": [a.line() for a in run.actions()],
        "witness": witness.to_json(),
        "graph": graph_to_json(graph),
    }


def _witness_text(witness, graph) -> str:
    parts = []
    for eid, kind in witness.steps:
        parts.append(f"e{eid}:{graph.event(eid).label()}")
        if kind is not None:
            parts.append(f"-{kind}->")
    return " ".join(parts)


# ----------------------------------------------------------------- check


def cmd_check(args) -> int:
    started = time.perf_counter()
    m, data = _load_machine(args.file)
    depth = args.depth or default_depth(m)
    wanted = _wanted(args.model)
    wra = verify_wra(m, strict_init=args.strict_init)
    pm = wra.machine  # pruned; trace indices refer to it
    text = [f"machine {m.name}: {len(pm.states)} states, {len(pm.transitions)} transitions, depth {depth}"]
    stages = []
    for s in wra.stages:
        blocking = s.stage != "ghost" or args.strict_init
        entry = s.to_json()
        entry["blocking"] = blocking
        stages.append(entry)
        note = "" if s.passed or blocking else " (advisory: a register is read before it is written)"
        text.append(f"stage {s.stage:<8} {s.verdict}{note}")
        if not s.passed and blocking:
            text.append(render_derivation(s, pm))
    verdicts: dict[str, dict] = {}
    counterexample: Optional[dict] = None
    stage_witness: Optional[list[str]] = None
    nodes = 0
    violated: Optional[str] = None
    inconclusive = False

    if not wra.passed:
        violated = "wra"
        verdicts["wra"] = {"verdict": "violation", "method": "saturation", "conclusive": True, "failed_stage": wra.failed_stage}
        failed = wra.stage(wra.failed_stage)
        if wra.failed_stage == "hidden":
            trace = failed.witness_trace
            if trace is None:
                ev = find_violation(pm, "wra", depth)
                nodes += ev.nodes
                trace = ev.trace if ev.violated else None
            if trace is not None:
                run = run_trace(pm, trace)
                g = graph_of_run(run, pm.vars)
                counterexample = _counterexample("wra", run, g, check(g, "wra"))
        elif failed.witness_trace is not None:
            stage_witness = [a.line() for a in run_trace(pm, failed.witness_trace).actions()]
    elif "wra" in wanted:
        verdicts["wra"] = {"verdict": "pass", "method": "saturation", "conclusive": True}

    for model in ("ra", "sra"):
        if model not in wanted:
            continue
        if violated is not None:
            verdicts[model] = {"verdict": "violation", "method": "implied", "conclusive": True, "implied_by": violated}
            continue
        ev = find_violation(pm, model, depth)
        nodes += ev.nodes
        verdicts[model] = {
            "verdict": "violation" if ev.violated else "pass" if ev.conclusive else "inconclusive",
            "method": "explore",
            "conclusive": ev.conclusive,
            "outcome": ev.outcome,
            "stats": ev.stats(),
        }
        if ev.violated:
            violated = model
            counterexample = _counterexample(model, ev.run, ev.graph, ev.witness)
        elif not ev.conclusive:
            inconclusive = True

    for model in ORDER:
        if model in verdicts:
            v = verdicts[model]
            extra = f" (implied by {v['implied_by'].upper()})" if v.get("implied_by") else ""
            if v["method"] == "explore":
                n = v["stats"]["nodes"]
                extra = f" (found after {n} nodes)" if v["verdict"] == "violation" else f" ({v['outcome']}, {n} nodes)"
            text.append(f"{model.upper()}: {v['verdict']}{extra}")
    if counterexample is not None:
        text.append(f"counterexample ({counterexample['model'].upper()}), transitions {counterexample['transitions']}:")
        text.extend("  " + line for line in counterexample["trace"])
        g = graph_of_actions(parse_trace("\n".join(counterexample["trace"])), pm.vars)
        text.append("cycle: " + _witness_text(check(g, counterexample["model"]), g))
    elif stage_witness is not None:
        text.append("offending run:")
        text.extend("  " + line for line in stage_witness)

    if violated is not None:
        code = EXIT_VIOLATION
        summary = f"weakest violated: {violated.upper()}"
    elif inconclusive:
        code = EXIT_INCONCLUSIVE
        summary = f"no violation up to depth {depth} (inconclusive)"
    else:
        code = EXIT_OK
        summary = "consistent: " + ", ".join(m_.upper() for m_ in wanted)
    text.append(summary)

    if args.dot and counterexample is not None:
        g = graph_of_actions(parse_trace("\n".join(counterexample["trace"])), pm.vars)
        _write(args.dot, graph_to_dot(g, check(g, counterexample["model"]), m.name))

    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "command": "check",
        "input_digest": "sha256:" + hashlib.sha256(data).hexdigest(),
        "machine": {"name": m.name, "states": len(pm.states), "transitions": len(pm.transitions)},
        "model": args.model,
        "depth": depth,
        "strict_init": args.strict_init,
        "stages": stages,
        "verdicts": verdicts,
        "weakest_violated": violated or "none",
        "conclusive": {k: v["conclusive"] for k, v in verdicts.items()},
        "counterexample": counterexample,
        "stage_witness": stage_witness,
        "stats": {"facts": sum(s.facts_count for s in wra.stages), "nodes": nodes},
        "exit_code": code,
    }
    _emit(report, args, text, started)
    return code


# ------------------------------------------------------------------- run


def cmd_run(args) -> int:
    started = time.perf_counter()
    if args.machine is None and not args.no_machine:
        raise InputError("give a machine file or --no-machine")
    tdata = _read(args.trace)
    try:
        actions = parse_trace(tdata.decode("utf-8"))
    except (TraceError, UnicodeDecodeError) as e:
        raise InputError(f"{args.trace}: {e}") from None
    digest = hashlib.sha256(tdata)
    try:
        if args.no_machine:
            xs: dict[str, None] = {}
            for a in actions:
                if a.var is not None:
                    xs.setdefault(a.var, None)
            g = graph_of_actions(actions, list(xs))
        else:
            m, mdata = _load_machine(args.machine)
            digest.update(mdata)
            g = graph_of_run(match_trace(m, actions), m.vars)
    except (TraceError, GraphError) as e:
        raise InputError(f"{args.trace}: {e}") from None
    wanted = _wanted(args.model)
    verdicts = {}
    text = [f"trace: {len(actions)} steps, {len(g.events)} events"]
    violated = None
    counterexample = None
    for model in ORDER if args.model == "all" else wanted:
        wit = check(g, model)
        verdicts[model] = {"verdict": "pass" if wit is None else "violation", "conclusive": True}
        if wit is not None:
            verdicts[model]["witness"] = wit.to_json()
            text.append(f"{model.upper()}: violation, cycle: {_witness_text(wit, g)}")
            if violated is None:
                violated = model
                counterexample = {"model": model, "witness": wit.to_json()}
        else:
            text.append(f"{model.upper()}: pass")
    text.append(f"weakest violated: {violated.upper()}" if violated else "consistent: " + ", ".join(w.upper() for w in wanted))
    if args.dot:
        _write(args.dot, graph_to_dot(g, check(g, violated) if violated else None))
    code = EXIT_VIOLATION if violated else EXIT_OK
    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "command": "run",
        "input_digest": "sha256:" + digest.hexdigest(),
        "model": args.model,
        "verdicts": verdicts,
        "weakest_violated": violated or "none",
        "conclusive": {k: True for k in verdicts},
        "counterexample": counterexample,
        "graph": graph_to_json(g),
        "exit_code": code,
    }
    _emit(report, args, text, started)
    return code


# ---------------------------------------------------------------- gadget


def cmd_gadget(args) -> int:
    try:
        if args.taut is not None:
            m = tautology_to_machine(parse_formula(args.taut, "dnf"))
        else:
            m = sat_to_machine(parse_formula(args.sat, "cnf"))
    except FormulaError as e:
        raise InputError(str(e)) from None
    _output(print_machine(m), args.output)
    return EXIT_OK


# ---------------------------------------------------------------- litmus


def cmd_litmus(args) -> int:
    if args.name not in LITMUS:
        raise InputError(f"unknown litmus test {args.name!r}; known: {', '.join(LITMUS)}")
    spec = LITMUS[args.name]
    m = litmus(args.name)
    if not args.check:
        _output(print_machine(m), args.output)
        return EXIT_OK
    from .explore import weakest_violated

    res = weakest_violated(m)
    label = res.weakest.upper() if res.weakest != "none" else "none"
    if res.weakest != spec.expected:
        print(f"{args.name}: expected {spec.expected}, got {res.weakest}", file=sys.stderr)
        return EXIT_INPUT
    print(f"weakest violated: {label}")
    if res.weakest != "none":
        return EXIT_VIOLATION
    return EXIT_OK if res.conclusive else EXIT_INCONCLUSIVE


# ------------------------------------------------------------------ main


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None


def _output(text: str, path: Optional[str]) -> None:
    if path and path != "-":
        _write(path, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmv", description="Check register machines against WRA, RA and SRA.")
    p.add_argument("--version", action="version", version=f"rmv {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", choices=("wra", "ra", "sra", "all"), default="all")
        sp.add_argument("--json", action="store_true", help="print a JSON report")
        sp.add_argument("--quiet", action="store_true", help="print only the verdict line")
        sp.add_argument("--dot", metavar="FILE", help="write the counterexample graph in DOT format")

    c = sub.add_parser("check", help="verify a machine file")
    c.add_argument("file")
    common(c)
    c.add_argument("--depth", type=int, help="exploration depth (default: derived from the machine)")
    c.add_argument("--strict-init", action="store_true", help="fail machines that read a register before writing it")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("run", help="test a single trace")
    r.add_argument("machine", nargs="?")
    r.add_argument("--trace", required=True)
    r.add_argument("--no-machine", action="store_true", help="check the trace without a machine")
    common(r)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gadget", help="compile a formula into a machine")
    grp = g.add_mutually_exclusive_group(required=True)
    grp.add_argument("--taut", metavar="DNF", help="RA violation iff the DNF formula is not a tautology")
    grp.add_argument("--sat", metavar="CNF", help="RA violation iff the CNF formula is satisfiable")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gadget)

    lt = sub.add_parser("litmus", help="emit or check a corpus litmus machine")
    lt.add_argument("name")
    grp = lt.add_mutually_exclusive_group()
    grp.add_argument("-o", "--output")
    grp.add_argument("--check", action="store_true")
    lt.set_defaults(func=cmd_litmus)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code not in (0, None) else EXIT_OK
    if getattr(args, "depth", None) is not None and args.depth <= 0:
        print("rmv: --depth must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as e:
        print(f"rmv: {e}", file=sys.stderr)
        return EXIT_INPUT
    except MismatchedRead as e:
        print(f"rmv: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:  # e.g. a bad RMV_DEPTH_CAP
        print(f"rmv: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
