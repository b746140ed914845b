"""Move code for overhead-free schedules.

Every consumer slot of a variable gets one data move from the producer's output
buffer to the consumer PU's left or right input buffer, and every leaf gets one
move of its memory address into the left input buffer of its own PU.  Moves are
ordered so that each input buffer receives operands in the production order of
its PU and each output buffer ships values in the production order of its PU.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass

from .model import BasicBlock, L, R, consumer_slots
from .schedule import Schedule, validate

DATA = "Data"
LOAD_ADDRESS = "LoadAddress"


class CyclicPrecedence(RuntimeError):
    pass


class InvalidSchedule(ValueError):
    pass


@dataclass(frozen=True)
class MoveInstruction:
    kind: str
    src: int
    tgt_pu: int
    tgt_side: str

    def format(self, bb: BasicBlock) -> str:
        name = bb.names[self.src]
        src = f"addr({name})" if self.kind == LOAD_ADDRESS else name
        return f"{src} -> PU{self.tgt_pu}.{self.tgt_side}"

    def to_dict(self, bb: BasicBlock) -> dict:
        return {"kind": self.kind, "src": bb.names[self.src], "pu": self.tgt_pu, "side": self.tgt_side}


@dataclass(frozen=True)
class MoveProgram:
    """Ordered moves plus the schedule they were generated for.

    The schedule tells the machine which output buffer holds each source
    variable and which operation each PU performs next.  A move whose target PU
    equals ``pu_count`` goes to the store unit.
    """

    moves: tuple[MoveInstruction, ...]
    schedule: Schedule

    @property
    def pu_count(self) -> int:
        return self.schedule.pu_count

    def format(self, bb: BasicBlock) -> str:
        return "".join(m.format(bb) + "\n" for m in self.moves)

    def to_json(self, bb: BasicBlock) -> str:
        return json.dumps([m.to_dict(bb) for m in self.moves])


_MOVE = re.compile(r"^\s*(addr\(\s*(\w+)\s*\)|(\w+))\s*->\s*PU_?\{?(\d+)\}?[.,]\s*([LR])\s*$")


def parse_moves(bb: BasicBlock, text: str, schedule: Schedule) -> MoveProgram:
    """Read moves in ``x0 -> PU0.L`` / ``addr(x2) -> PU1.L`` form, one per line or comma separated."""
    moves = []
    for item in re.split(r"[\n;]+", text):
        if not item.strip():
            continue
        m = _MOVE.match(item)
        if not m:
            raise ValueError(f"cannot parse move {item.strip()!r}")
        addr, plain = m.group(2), m.group(3)
        kind = LOAD_ADDRESS if addr else DATA
        moves.append(MoveInstruction(kind, bb.var(addr or plain), int(m.group(4)), m.group(5)))
    return MoveProgram(tuple(moves), schedule)


def _slots(bb: BasicBlock, s: Schedule):
    """Per move: (kind, src, tgt_pu, side, consumer, consumer position)."""
    out = []
    for p, seq in enumerate(s.sequences):
        for pos, x in enumerate(seq):
            ops = bb.operands(x)
            if ops is None:
                out.append((LOAD_ADDRESS, x, p, L, x, pos))
            else:
                out.append((DATA, ops[0], p, L, x, pos))
                out.append((DATA, ops[1], p, R, x, pos))
    return out


def expected_buffers(bb: BasicBlock, s: Schedule) -> dict[tuple[int, str], list[tuple[str, int]]]:
    """The (kind, src) sequence every input buffer must receive."""
    bufs: dict[tuple[int, str], list] = {}
    for kind, src, p, side, _, _ in _slots(bb, s):
        bufs.setdefault((p, side), []).append((kind, src))
    return bufs


def move_program(bb: BasicBlock, s: Schedule, *, stores: bool = False, check: bool = True) -> MoveProgram:
    """Linearize the move precedence graph of a valid schedule.

    With ``stores`` each result variable also gets a move to the store unit.
    """
    if check:
        report = validate(bb, s)
        if not report.valid:
            raise InvalidSchedule(f"schedule is not valid: {report.to_dict(bb)['violations']}")
    pu = s.assignment()
    pos = s.positions()
    slots = _slots(bb, s)
    if stores:
        for v in bb.roots:
            slots.append((DATA, v, s.pu_count, L, v, len(bb.names) + v))
    m = len(slots)
    succ: list[list[int]] = [[] for _ in range(m)]
    indeg = [0] * m

    def edge(a, b):
        succ[a].append(b)
        indeg[b] += 1

    # (i) input buffer order follows the consumer's production order
    by_buf: dict[tuple[int, str], list[int]] = {}
    for i, (_, _, p, side, _, cpos) in enumerate(slots):
        by_buf.setdefault((p, side), []).append(i)
    for idx in by_buf.values():
        idx.sort(key=lambda i: slots[i][5])
        for a, b in zip(idx, idx[1:]):
            edge(a, b)
    # (ii) output buffer order follows the producer's production order
    by_src_pu: dict[int, dict[int, list[int]]] = {}
    for i, (kind, src, *_rest) in enumerate(slots):
        if kind == DATA:
            by_src_pu.setdefault(pu[src], {}).setdefault(pos[src], []).append(i)
    for groups in by_src_pu.values():
        keys = sorted(groups)
        for ka, kb in zip(keys, keys[1:]):
            for a in groups[ka]:
                for b in groups[kb]:
                    edge(a, b)

    key = [(slots[i][1], slots[i][4], slots[i][3]) for i in range(m)]
    heap = [(key[i], i) for i in range(m) if indeg[i] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, i = heapq.heappop(heap)
        out.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, (key[j], j))
    if len(out) != m:
        raise CyclicPrecedence("move precedence graph has a cycle; schedule is not executable")
    moves = tuple(MoveInstruction(slots[i][0], slots[i][1], slots[i][2], slots[i][3]) for i in out)
    return MoveProgram(moves, s)


def fifo_consistent(bb: BasicBlock, s: Schedule, p: MoveProgram) -> bool:
    """Check buffer orders and move multiset of ``p`` against schedule ``s``."""
    try:
        pu = s.assignment()
        pos = s.positions()
    except TypeError:
        return False
    if len(pu) != bb.n_vars:
        return False
    got: dict[tuple[int, str], list] = {}
    last_src_pos: dict[int, int] = {}
    for mv in p.moves:
        if mv.tgt_side not in (L, R) or not 0 <= mv.src < bb.n_vars:
            return False
        if mv.tgt_pu == s.pu_count and mv.kind == DATA:
            pass  # store move: only the output order below applies
        elif 0 <= mv.tgt_pu < s.pu_count:
            got.setdefault((mv.tgt_pu, mv.tgt_side), []).append((mv.kind, mv.src))
        else:
            return False
        if mv.kind == DATA:
            q = pu[mv.src]
            if pos[mv.src] < last_src_pos.get(q, -1):
                return False
            last_src_pos[q] = pos[mv.src]
    want = expected_buffers(bb, s)
    return got == want


def move_count(bb: BasicBlock) -> int:
    return len(bb.leaves) + sum(len(consumer_slots(bb, v)) for v in range(bb.n_vars))
