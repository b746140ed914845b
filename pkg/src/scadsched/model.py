"""Basic blocks as DAGs of binary operations.

A block is read from ASP-style facts::

    operand(x3, x0, x1).   % x3 := op(x0, x1)
    var(y).                % declares a variable that takes part in no operation

Variables that are never defined are leaves (values loaded from memory).
Every variable gets a dense integer id.  Ids follow first appearance while
scanning each fact as left operand, right operand, defined variable, so that
operands usually get smaller ids than the values computed from them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

L, R = "L", "R"

_FACT = re.compile(r"(operand|var)\s*\(([^()]*)\)\s*\.")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$|^[0-9]+$")


class BlockError(ValueError):
    pass


class FactSyntaxError(BlockError):
    pass


class DuplicateDefinition(BlockError):
    pass


class CyclicProgram(BlockError):
    pass


class EmptyProgram(BlockError):
    pass


# A fact is either (defined, left, right) or (declared,) -- names, not ids.
Fact = tuple


@dataclass(frozen=True, eq=False)
class BasicBlock:
    """Immutable basic block built from an ordered list of facts.

    ``names[i]`` is the display name of variable ``i``; ``defs`` maps a defined
    variable to its ``(left, right)`` operands.
    """

    facts: tuple
    names: tuple[str, ...]
    defs: dict[int, tuple[int, int]] = field(repr=False)

    @classmethod
    def from_facts(cls, facts: Iterable[Sequence[str]]) -> "BasicBlock":
        facts = tuple(tuple(f) for f in facts)
        if not facts:
            raise EmptyProgram("block has no facts")
        index: dict[str, int] = {}

        def vid(name: str) -> int:
            if name not in index:
                index[name] = len(index)
            return index[name]

        defs: dict[int, tuple[int, int]] = {}
        for fact in facts:
            if len(fact) == 1:
                vid(fact[0])
                continue
            if len(fact) != 3:
                raise FactSyntaxError(f"expected 3 arguments, got {fact!r}")
            x, a, b = fact
            left, right = vid(a), vid(b)
            xi = vid(x)
            if xi in defs:
                raise DuplicateDefinition(f"{x} is defined twice")
            defs[xi] = (left, right)
        names = tuple(sorted(index, key=index.__getitem__))
        bb = cls(facts, names, defs)
        bb._check_acyclic()
        return bb

    def __eq__(self, other):
        if not isinstance(other, BasicBlock):
            return NotImplemented
        return self.names == other.names and self.defs == other.defs

    def __hash__(self):
        return hash((self.names, tuple(sorted(self.defs.items()))))

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    @cached_property
    def leaves(self) -> frozenset[int]:
        return frozenset(v for v in range(self.n_vars) if v not in self.defs)

    def is_leaf(self, v: int) -> bool:
        return v not in self.defs

    def operands(self, v: int) -> tuple[int, int] | None:
        return self.defs.get(v)

    def name(self, v: int) -> str:
        return self.names[v]

    def var(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Initial DAG edges (operand -> defined), duplicates removed."""
        out = []
        seen = set()
        for x in sorted(self.defs):
            for o in self.defs[x]:
                if (o, x) not in seen:
                    seen.add((o, x))
                    out.append((o, x))
        return tuple(out)

    @cached_property
    def consumers(self) -> tuple[tuple[int, ...], ...]:
        succ: list[set[int]] = [set() for _ in range(self.n_vars)]
        for a, b in self.edges:
            succ[a].add(b)
        return tuple(tuple(sorted(s)) for s in succ)

    @cached_property
    def roots(self) -> tuple[int, ...]:
        """Variables nobody consumes; their values are the block's results."""
        return tuple(v for v in range(self.n_vars) if not self.consumers[v])

    @cached_property
    def topo_order(self) -> tuple[int, ...]:
        """Topological order of the initial DAG, smallest id first among ready vars."""
        import heapq

        indeg = [0] * self.n_vars
        for _, b in self.edges:
            indeg[b] += 1
        ready = [v for v in range(self.n_vars) if indeg[v] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for w in self.consumers[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(ready, w)
        return tuple(order)

    def _check_acyclic(self) -> None:
        if len(self.topo_order) != self.n_vars:
            stuck = sorted(set(range(self.n_vars)) - set(self.topo_order))
            raise CyclicProgram(
                "definitions form a cycle through " + ", ".join(self.names[v] for v in stuck)
            )


def parse_block(text: str) -> BasicBlock:
    """Parse ``operand/3`` (and ``var/1``) facts; ``%`` starts a line comment."""
    body = "\n".join(line.split("%", 1)[0] for line in text.splitlines())
    facts = []
    pos = 0
    for m in _FACT.finditer(body):
        gap = body[pos:m.start()]
        if gap.strip():
            raise FactSyntaxError(f"unexpected text {gap.strip()!r}")
        pos = m.end()
        args = [a.strip() for a in m.group(2).split(",")]
        want = 3 if m.group(1) == "operand" else 1
        if len(args) != want or not all(_NAME.match(a) for a in args):
            raise FactSyntaxError(f"malformed fact {m.group(0)!r}")
        facts.append(tuple(args))
    tail = body[pos:]
    if tail.strip():
        raise FactSyntaxError(f"unexpected text {tail.strip()!r}")
    return BasicBlock.from_facts(facts)


def read_block(path) -> BasicBlock:
    with open(path) as f:
        return parse_block(f.read())


@dataclass(frozen=True)
class PrecedenceRelation:
    """Transitive closure of the initial edges; ``masks[v]`` has bit u set iff u precedes v."""

    masks: tuple[int, ...]

    @property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (u, v) for v, m in enumerate(self.masks) for u in range(len(self.masks)) if m >> u & 1
        )

    def __contains__(self, pair) -> bool:
        u, v = pair
        return bool(self.masks[v] >> u & 1)

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self):
        return sum(bin(m).count("1") for m in self.masks)


def predecessors(bb: BasicBlock) -> PrecedenceRelation:
    masks = [0] * bb.n_vars
    for v in bb.topo_order:
        ops = bb.operands(v)
        if ops:
            for o in ops:
                masks[v] |= masks[o] | (1 << o)
    return PrecedenceRelation(tuple(masks))


def depth(bb: BasicBlock) -> int:
    """Number of nodes on a longest path of the initial DAG."""
    d = [1] * bb.n_vars
    for v in bb.topo_order:
        ops = bb.operands(v)
        if ops:
            d[v] = 1 + max(d[o] for o in ops)
    return max(d)


def consumer_slots(bb: BasicBlock, v: int) -> list[tuple[int, str]]:
    """All (consumer, side) pairs reading ``v``, ordered by consumer id then L before R."""
    slots = []
    for x in sorted(bb.defs):
        left, right = bb.defs[x]
        if left == v:
            slots.append((x, L))
        if right == v:
            slots.append((x, R))
    return slots


_PU_COLORS = ("orange", "violet", "forestgreen", "steelblue", "firebrick", "goldenrod")


def to_dot(bb: BasicBlock, schedule=None) -> str:
    lines = ["digraph basic_block {", "  rankdir=BT;"]
    for v, name in enumerate(bb.names):
        shape = "box" if bb.is_leaf(v) else "ellipse"
        lines.append(f'  "{name}" [shape={shape}];')
    for x in sorted(bb.defs):
        for o in bb.defs[x]:
            lines.append(f'  "{bb.names[o]}" -> "{bb.names[x]}";')
    if schedule is not None:
        for p, seq in enumerate(schedule.sequences):
            color = _PU_COLORS[p % len(_PU_COLORS)]
            for a, b in zip(seq, seq[1:]):
                lines.append(
                    f'  "{bb.names[a]}" -> "{bb.names[b]}" [style=dashed, color={color}, label="PU{p}"];'
                )
    lines.append("}")
    return "\n".join(lines) + "\n"
