"""Cycle-level simulator of a SCAD machine running move code.

Each PU has a left and right input FIFO and one output FIFO of ``[address,
value]`` entries, ``value`` being ``None`` until known.  Per round:

1. issue: moves are registered in program order, appending ``(tgt, None)`` to
   the source output buffer and ``(src, None)`` to the target input buffer
   (address moves enter the input buffer already filled).  ``Preregistered``
   issues as many moves as fit, ``OnePerCycle`` at most one.  A move that
   does not fit stalls the control unit.
2. fire: a PU whose next variable is a leaf fires on an address at its left
   head; otherwise it needs data at both heads.  Firing consumes the heads and
   fills the ``None`` entries of its output buffer closest to the head, one per
   pending copy of the result.  Copies whose move is not registered yet are
   filled in later rounds before the PU starts its next variable.
3. deliver: filled entries at output heads are sent at once (zero latency) and
   fill the matching entry closest to the head of the target input buffer.

Values are symbolic terms, so correctness is structural equality with
:func:`reference_eval`.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

from .codegen import DATA, LOAD_ADDRESS, MoveProgram
from .model import BasicBlock, L, R

UNBOUNDED = None
PREREGISTERED = "Preregistered"
ONE_PER_CYCLE = "OnePerCycle"
COMPLETED = "Completed"
DEADLOCK = "Deadlock"
MEMORY = "mem"


class MalformedProgram(ValueError):
    pass


@dataclass(frozen=True)
class Load:
    var: int

    def show(self, bb: BasicBlock) -> str:
        return f"load({bb.names[self.var]})"


@dataclass(frozen=True)
class Op:
    var: int
    left: object
    right: object

    def show(self, bb: BasicBlock) -> str:
        return f"{bb.names[self.var]}({self.left.show(bb)}, {self.right.show(bb)})"


@dataclass(frozen=True)
class Addr:
    var: int

    def show(self, bb: BasicBlock) -> str:
        return f"&{bb.names[self.var]}"


@dataclass(frozen=True)
class MachineConfig:
    pu_count: int
    input_buffer_capacity: int | None = UNBOUNDED
    output_buffer_capacity: int | None = UNBOUNDED
    issue_mode: str = PREREGISTERED
    trace: bool = False

    def __post_init__(self):
        for cap in (self.input_buffer_capacity, self.output_buffer_capacity):
            if cap is not None and cap < 1:
                raise ValueError("buffer capacities must be >= 1")
        if self.issue_mode not in (PREREGISTERED, ONE_PER_CYCLE):
            raise ValueError(f"unknown issue mode {self.issue_mode!r}")


@dataclass
class SimResult:
    status: str
    outputs: dict
    rounds: int
    stall_cycles: int = 0
    stored: dict = field(default_factory=dict)
    trace: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    def to_dict(self, bb: BasicBlock) -> dict:
        return {
            "status": self.status,
            "rounds": self.rounds,
            "stall_cycles": self.stall_cycles,
            "outputs": {bb.names[v]: t.show(bb) for v, t in sorted(self.outputs.items())},
        }


def reference_eval(bb: BasicBlock) -> dict:
    """Result term of every root, built by structural recursion."""
    terms: dict = {}
    for v in bb.topo_order:
        ops = bb.operands(v)
        terms[v] = Load(v) if ops is None else Op(v, terms[ops[0]], terms[ops[1]])
    return {v: terms[v] for v in bb.roots}


class _Machine:
    def __init__(self, bb: BasicBlock, prog: MoveProgram, cfg: MachineConfig):
        self.bb = bb
        self.cfg = cfg
        self.seqs = prog.schedule.sequences
        self.k = len(self.seqs)
        self.pu_of = prog.schedule.assignment()
        for mv in prog.moves:
            if not 0 <= mv.src < bb.n_vars or mv.src not in self.pu_of:
                raise MalformedProgram(f"move source {mv.src!r} is not scheduled")
            if mv.tgt_side not in (L, R) or not 0 <= mv.tgt_pu <= self.k:
                raise MalformedProgram(f"move target PU{mv.tgt_pu}.{mv.tgt_side} does not exist")
            if mv.kind == LOAD_ADDRESS and (mv.tgt_pu == self.k or mv.tgt_side != L):
                raise MalformedProgram("address moves must target a left input buffer")
        self.moves = prog.moves
        self.copies = Counter(mv.src for mv in prog.moves if mv.kind == DATA)
        self.inp = {(p, s): deque() for p in range(self.k) for s in (L, R)}
        self.out = [deque() for _ in range(self.k)]
        self.cursor = [0] * self.k
        self.pending = [0] * self.k  # copies of the current variable still to fill
        self.value = [None] * self.k
        self.next_move = 0
        self.outputs: dict = {}
        self.stored: dict = {}

    def _fits(self, mv) -> bool:
        cin, cout = self.cfg.input_buffer_capacity, self.cfg.output_buffer_capacity
        if mv.tgt_pu < self.k and cin is not None and len(self.inp[mv.tgt_pu, mv.tgt_side]) >= cin:
            return False
        if mv.kind == DATA and cout is not None and len(self.out[self.pu_of[mv.src]]) >= cout:
            return False
        return True

    def _register(self, mv) -> None:
        if mv.kind == LOAD_ADDRESS:
            self.inp[mv.tgt_pu, L].append([MEMORY, Addr(mv.src)])
            return
        q = self.pu_of[mv.src]
        tgt = "lsu" if mv.tgt_pu == self.k else (mv.tgt_pu, mv.tgt_side)
        self.out[q].append([tgt, None])
        if tgt != "lsu":
            self.inp[tgt].append([q, None])

    def issue(self) -> tuple[int, bool]:
        issued, stalled = 0, False
        limit = 1 if self.cfg.issue_mode == ONE_PER_CYCLE else len(self.moves)
        while issued < limit and self.next_move < len(self.moves):
            mv = self.moves[self.next_move]
            if not self._fits(mv):
                stalled = True
                break
            self._register(mv)
            self.next_move += 1
            issued += 1
        return issued, stalled

    def _fill(self, p: int) -> int:
        filled = 0
        for entry in self.out[p]:
            if self.pending[p] == 0:
                break
            if entry[1] is None:
                entry[1] = self.value[p]
                self.pending[p] -= 1
                filled += 1
        return filled

    def fire(self) -> list[str]:
        events = []
        for p in range(self.k):
            if self.pending[p]:
                if self._fill(p):
                    events.append(f"PU{p}+")
                if self.pending[p] == 0:
                    self.cursor[p] += 1
                continue
            if self.cursor[p] >= len(self.seqs[p]):
                continue
            v = self.seqs[p][self.cursor[p]]
            lq, rq = self.inp[p, L], self.inp[p, R]
            ops = self.bb.operands(v)
            if ops is None:
                if not lq or not isinstance(lq[0][1], Addr):
                    continue
                term = Load(lq.popleft()[1].var)
            else:
                if not lq or not rq:
                    continue
                lv, rv = lq[0][1], rq[0][1]
                if lv is None or rv is None or isinstance(lv, Addr) or isinstance(rv, Addr):
                    continue
                lq.popleft()
                rq.popleft()
                term = Op(v, lv, rv)
            events.append(f"PU{p}:{self.bb.names[v]}")
            if v in self.bb.roots:
                self.outputs[v] = term
            self.value[p] = term
            self.pending[p] = self.copies[v]
            self._fill(p)
            if self.pending[p] == 0:
                self.cursor[p] += 1
        return events

    def deliver(self) -> list[str]:
        events = []
        moved = True
        while moved:
            moved = False
            for q in range(self.k):
                buf = self.out[q]
                while buf and buf[0][1] is not None:
                    tgt, val = buf.popleft()
                    moved = True
                    if tgt == "lsu":
                        self.stored[val.var] = val
                        events.append(f"PU{q}->LSU")
                        continue
                    for entry in self.inp[tgt]:
                        if entry[0] == q and entry[1] is None:
                            entry[1] = val
                            break
                    else:
                        raise MalformedProgram(f"no pending entry in PU{tgt[0]}.{tgt[1]} for PU{q}")
                    events.append(f"PU{q}->PU{tgt[0]}.{tgt[1]}")
        return events

    def done(self) -> bool:
        return (
            self.next_move == len(self.moves)
            and all(c >= len(s) for c, s in zip(self.cursor, self.seqs))
            and not any(self.out)
        )


def simulate(bb: BasicBlock, p: MoveProgram, cfg: MachineConfig) -> SimResult:
    if p.pu_count > cfg.pu_count:
        raise MalformedProgram(f"program needs {p.pu_count} PUs, machine has {cfg.pu_count}")
    m = _Machine(bb, p, cfg)
    rounds = stalls = 0
    trace = []
    while not m.done():
        rounds += 1
        issued, stalled = m.issue()
        stalls += stalled
        fired = m.fire()
        sent = m.deliver()
        if cfg.trace:
            trace.append(f"round {rounds}: issued {issued} fired [{' '.join(fired)}] sent [{' '.join(sent)}]")
        if not issued and not fired and not sent:
            return SimResult(DEADLOCK, m.outputs, rounds - 1, stalls - stalled, m.stored, trace)
    return SimResult(COMPLETED, m.outputs, rounds, stalls, m.stored, trace)
