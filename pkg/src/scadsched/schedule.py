"""Schedules, their validity conditions, the combined DAG and its cost."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import BasicBlock, predecessors

PARTITION = "Partition"
DEPENDENCY = "Dependency"
OPERAND_ORDER_L = "OperandOrderL"
OPERAND_ORDER_R = "OperandOrderR"
COMBINED_CYCLE = "CombinedCycle"


class UnknownVariable(KeyError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Per-PU production sequences of variable ids; head of each list is produced first."""

    sequences: tuple[tuple[int, ...], ...]

    def __init__(self, sequences):
        object.__setattr__(self, "sequences", tuple(tuple(s) for s in sequences))

    @property
    def pu_count(self) -> int:
        return len(self.sequences)

    def assignment(self) -> dict[int, int]:
        return {v: p for p, seq in enumerate(self.sequences) for v in seq}

    def positions(self) -> dict[int, int]:
        return {v: i for seq in self.sequences for i, v in enumerate(seq)}

    @classmethod
    def from_names(cls, bb: BasicBlock, pus: Sequence[Sequence[str]]) -> "Schedule":
        try:
            return cls([[bb.index[n] for n in seq] for seq in pus])
        except KeyError as e:
            raise UnknownVariable(f"schedule mentions unknown variable {e.args[0]!r}") from None

    def to_names(self, bb: BasicBlock) -> list[list[str]]:
        return [[bb.names[v] for v in seq] for seq in self.sequences]

    def to_json(self, bb: BasicBlock) -> str:
        return json.dumps({"pus": self.to_names(bb)})

    @classmethod
    def from_json(cls, bb: BasicBlock, text: str) -> "Schedule":
        data = json.loads(text)
        return cls.from_names(bb, data["pus"])

    def format(self, bb: BasicBlock) -> str:
        return "  ".join(f"PU{p}:[{','.join(seq)}]" for p, seq in enumerate(self.to_names(bb)))


@dataclass(frozen=True)
class Violation:
    kind: str
    witness: tuple

    def to_dict(self, bb: BasicBlock | None = None) -> dict:
        def show(x):
            if bb is not None and isinstance(x, int):
                return bb.names[x]
            return x

        return {"kind": self.kind, "witness": [show(w) for w in self.witness]}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_dict(self, bb: BasicBlock | None = None) -> dict:
        return {"valid": self.valid, "violations": [v.to_dict(bb) for v in self.violations]}


def _check_vars(bb: BasicBlock, s: Schedule) -> None:
    for seq in s.sequences:
        for v in seq:
            if not (isinstance(v, int) and 0 <= v < bb.n_vars):
                raise UnknownVariable(f"schedule mentions unknown variable {v!r}")


def validate(bb: BasicBlock, s: Schedule, *, acyclic: bool = True) -> ValidationReport:
    """Check partition, dependency order, operand-order preservation and, unless
    ``acyclic`` is false, acyclicity of the combined DAG.

    Witnesses: Partition -> (var, occurrences); Dependency -> (pred, succ, pu);
    OperandOrderL/R -> (v1, v2, op1, op2); CombinedCycle -> vars on a cycle.
    """
    _check_vars(bb, s)
    out: list[Violation] = []
    seen: dict[int, int] = {}
    for seq in s.sequences:
        for v in seq:
            seen[v] = seen.get(v, 0) + 1
    for v in range(bb.n_vars):
        if seen.get(v, 0) != 1:
            out.append(Violation(PARTITION, (v, seen.get(v, 0))))
    if out:
        return ValidationReport(tuple(out))

    pu = s.assignment()
    pos = s.positions()
    prec = predecessors(bb)
    for p, seq in enumerate(s.sequences):
        for i, u in enumerate(seq):
            for v in seq[i + 1:]:
                if (v, u) in prec:
                    out.append(Violation(DEPENDENCY, (v, u, p)))
    for side, kind in ((0, OPERAND_ORDER_L), (1, OPERAND_ORDER_R)):
        for seq in s.sequences:
            for i, v1 in enumerate(seq):
                if v1 not in bb.defs:
                    continue
                for v2 in seq[i + 1:]:
                    if v2 not in bb.defs:
                        continue
                    a, b = bb.defs[v1][side], bb.defs[v2][side]
                    if a != b and pu[a] == pu[b] and pos[a] > pos[b]:
                        out.append(Violation(kind, (v1, v2, a, b)))
    if acyclic:
        cycle = combined_dag(bb, s).find_cycle()
        if cycle:
            out.append(Violation(COMBINED_CYCLE, tuple(cycle)))
    return ValidationReport(tuple(out))


class CyclicCost:
    """Marker returned by :func:`cost` when the combined graph has a cycle."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "CYCLIC"

    def __bool__(self):
        return False


CYCLIC = CyclicCost()


@dataclass(frozen=True)
class CombinedDag:
    n: int
    edges: frozenset[tuple[int, int]]
    order_edges: frozenset[tuple[int, int]] = frozenset()
    weights: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.weights:
            object.__setattr__(self, "weights", (1,) * self.n)

    @property
    def nodes(self) -> range:
        return range(self.n)

    @property
    def initial_nodes(self) -> tuple[int, ...]:
        has_in = {b for _, b in self.edges}
        return tuple(v for v in range(self.n) if v not in has_in)

    def _succ(self) -> list[list[int]]:
        succ: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in sorted(self.edges):
            succ[a].append(b)
        return succ

    def topological_order(self) -> list[int] | None:
        indeg = [0] * self.n
        for _, b in self.edges:
            indeg[b] += 1
        succ = self._succ()
        stack = [v for v in range(self.n) if indeg[v] == 0]
        order = []
        while stack:
            v = stack.pop()
            order.append(v)
            for w in succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    stack.append(w)
        return order if len(order) == self.n else None

    def find_cycle(self) -> list[int] | None:
        succ = self._succ()
        color = [0] * self.n
        parent = [-1] * self.n
        for root in range(self.n):
            if color[root]:
                continue
            stack = [(root, iter(succ[root]))]
            color[root] = 1
            while stack:
                v, it = stack[-1]
                for w in it:
                    if color[w] == 0:
                        color[w] = 1
                        parent[w] = v
                        stack.append((w, iter(succ[w])))
                        break
                    if color[w] == 1:
                        cyc = [v]
                        while cyc[-1] != w:
                            cyc.append(parent[cyc[-1]])
                        return cyc[::-1]
                else:
                    color[v] = 2
                    stack.pop()
        return None


def combined_dag(
    bb: BasicBlock, s: Schedule, weights: Mapping[str, int] | None = None
) -> CombinedDag:
    """Initial edges plus one edge per consecutive pair in each PU sequence."""
    order = frozenset((a, b) for seq in s.sequences for a, b in zip(seq, seq[1:]))
    w = (1,) * bb.n_vars
    if weights:
        w = tuple(int(weights.get(name, 1)) for name in bb.names)
        if any(x < 1 for x in w):
            raise ValueError("weights must be positive")
    return CombinedDag(bb.n_vars, frozenset(bb.edges) | order, order, w)


def cost(d: CombinedDag) -> int | CyclicCost:
    """Heaviest node-weighted path; the node count of a longest path for unit weights."""
    order = d.topological_order()
    if order is None:
        return CYCLIC
    preds: list[list[int]] = [[] for _ in range(d.n)]
    for a, b in d.edges:
        preds[b].append(a)
    fin = [0] * d.n
    for v in order:
        fin[v] = d.weights[v] + max((fin[u] for u in preds[v]), default=0)
    return max(fin, default=0)


def schedule_cost(bb: BasicBlock, s: Schedule, weights=None) -> int | CyclicCost:
    return cost(combined_dag(bb, s, weights))


def canonical_form(s: Schedule) -> Schedule:
    """Order PUs by their smallest variable id; empty PUs go last."""
    full = sorted((seq for seq in s.sequences if seq), key=min)
    empty = [seq for seq in s.sequences if not seq]
    return Schedule(full + empty)


def is_canonical(s: Schedule) -> bool:
    return canonical_form(s) == s


@dataclass(frozen=True)
class SolverBounds:
    """Search ceiling and optional hard bounds shared by the solver and the ASP emitter."""

    max_pus: int | None = None
    time_bound: int | None = None
    pu_bound: int | None = None

    def __post_init__(self):
        if self.max_pus is not None and self.max_pus < 1:
            raise ValueError("max_pus must be >= 1")
        for name in ("time_bound", "pu_bound"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValueError(f"{name} must be >= 1")

    def pu_ceiling(self, bb: BasicBlock) -> int:
        k = bb.n_vars if self.max_pus is None else min(self.max_pus, bb.n_vars)
        if self.pu_bound is not None:
            k = min(k, self.pu_bound)
        return k
