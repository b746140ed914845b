"""Exact overhead-free scheduling of basic blocks on buffered PU machines."""

from .model import BasicBlock, BlockError, depth, parse_block, read_block
from .schedule import Schedule, SolverBounds, canonical_form, schedule_cost, validate
from .solver import Objective, OptResult, count_valid, enumerate_valid, solve

__all__ = [
    "BasicBlock",
    "BlockError",
    "Objective",
    "OptResult",
    "Schedule",
    "SolverBounds",
    "canonical_form",
    "count_valid",
    "depth",
    "enumerate_valid",
    "parse_block",
    "read_block",
    "schedule_cost",
    "solve",
    "validate",
]

__version__ = "0.1.0"
