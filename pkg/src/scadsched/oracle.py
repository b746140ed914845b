"""Brute-force reference for schedule validity and enumeration.

Deliberately naive and independent of :mod:`scadsched.solver`: every surjective
assignment, every per-PU permutation, every pair checked in plain loops.
"""

from __future__ import annotations

import itertools

from .model import BasicBlock
from .schedule import Schedule

MAX_VARS = 9
MAX_PUS = 4


class TooLarge(ValueError):
    pass


def _reachable(bb: BasicBlock) -> set[tuple[int, int]]:
    succ = {v: set() for v in range(bb.n_vars)}
    for x, (a, b) in bb.defs.items():
        succ[a].add(x)
        succ[b].add(x)
    pairs = set()
    for src in range(bb.n_vars):
        todo = list(succ[src])
        seen = set()
        while todo:
            v = todo.pop()
            if v in seen:
                continue
            seen.add(v)
            pairs.add((src, v))
            todo.extend(succ[v])
    return pairs


def _has_cycle(bb: BasicBlock, seqs) -> bool:
    succ = {v: set() for v in range(bb.n_vars)}
    for x, (a, b) in bb.defs.items():
        succ[a].add(x)
        succ[b].add(x)
    for seq in seqs:
        for i in range(len(seq) - 1):
            succ[seq[i]].add(seq[i + 1])
    for start in range(bb.n_vars):
        todo = list(succ[start])
        seen = set()
        while todo:
            v = todo.pop()
            if v == start:
                return True
            if v not in seen:
                seen.add(v)
                todo.extend(succ[v])
    return False


def constraints_hold(bb: BasicBlock, seqs, pred=None, acyclic: bool = False) -> bool:
    """Direct check of the overhead-freedom conditions on a list of PU sequences."""
    if pred is None:
        pred = _reachable(bb)
    where = {}
    for p, seq in enumerate(seqs):
        for i, v in enumerate(seq):
            if v in where:
                return False
            where[v] = (p, i)
    if len(where) != bb.n_vars:
        return False
    for x in range(bb.n_vars):
        for y in range(bb.n_vars):
            if (x, y) in pred and where[x][0] == where[y][0] and where[y][1] < where[x][1]:
                return False
    for v1 in bb.defs:
        for v2 in bb.defs:
            if v1 == v2 or where[v1][0] != where[v2][0] or where[v1][1] > where[v2][1]:
                continue
            for side in (0, 1):
                a = bb.defs[v1][side]
                b = bb.defs[v2][side]
                if a != b and where[a][0] == where[b][0] and where[b][1] < where[a][1]:
                    return False
    if acyclic and _has_cycle(bb, seqs):
        return False
    return True


def brute_force_schedules(bb: BasicBlock, k: int, *, acyclic: bool = False) -> list[Schedule]:
    if bb.n_vars > MAX_VARS or k > MAX_PUS:
        raise TooLarge(f"oracle limited to {MAX_VARS} vars and {MAX_PUS} PUs")
    pred = _reachable(bb)
    found = []
    for assign in itertools.product(range(k), repeat=bb.n_vars):
        if len(set(assign)) != k:
            continue
        groups = [[v for v in range(bb.n_vars) if assign[v] == p] for p in range(k)]
        for seqs in itertools.product(*(itertools.permutations(g) for g in groups)):
            if constraints_hold(bb, seqs, pred, acyclic):
                found.append(Schedule(seqs))
    return found


def executable_check(bb: BasicBlock, s: Schedule) -> bool:
    """True iff move code can be generated for ``s`` and it runs to the right results."""
    from .codegen import CyclicPrecedence, move_program
    from .machine import MachineConfig, reference_eval, simulate

    try:
        prog = move_program(bb, s, check=False)
    except CyclicPrecedence:
        return False
    res = simulate(bb, prog, MachineConfig(pu_count=max(1, s.pu_count)))
    return res.completed and res.outputs == reference_eval(bb)
