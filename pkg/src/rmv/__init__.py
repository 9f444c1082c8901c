"""Register machines checked against weak consistency models."""

__version__ = "0.1.0"

from .egraph import ExecutionGraph, check, graph_of_run
from .explore import find_violation, weakest_violated
from .machine import RegisterMachine, parse_machine, parse_trace, print_machine, run_trace
from .saturation import verify_wra

__all__ = [
    "ExecutionGraph",
    "RegisterMachine",
    "check",
    "find_violation",
    "graph_of_run",
    "parse_machine",
    "parse_trace",
    "print_machine",
    "run_trace",
    "verify_wra",
    "weakest_violated",
]
