"""Parallel exact backtracking over index-encoded search trees."""

from .engine import Incumbent, SearchProblem, explore_steps, parallel_explore, serial_solve
from .index import ROOT, CurrentIndex, extract_heaviest, fix_index
from .runtime import ParallelResult, get_next_parent, get_parent, solve_parallel
from .transport import SimSchedule, Simulator

__version__ = "0.1.0"

__all__ = [
    "ROOT",
    "CurrentIndex",
    "Incumbent",
    "ParallelResult",
    "SearchProblem",
    "SimSchedule",
    "Simulator",
    "explore_steps",
    "extract_heaviest",
    "fix_index",
    "get_next_parent",
    "get_parent",
    "parallel_explore",
    "serial_solve",
    "solve_parallel",
]
