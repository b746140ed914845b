"""Counting acyclic schedules of bounded cost by layers of production time.

In an acyclic schedule every variable has an earliest production time in the
combined DAG, and along each PU these times strictly increase.  Building the
schedule layer by layer (all variables finishing at time 1, then 2, ...) and
appending to PU sequences generates every schedule exactly once.  A variable
may join layer ``t`` on PU ``p`` only if one of its operands or the current
last variable of ``p`` finished at ``t - 1``.

Appending makes positions final, so the operand-order rule becomes a read
pointer per (PU, side): once a consumer on ``p`` took its side-``s`` operand
from position ``i`` of PU ``r``, later consumers on ``p`` may not take a
side-``s`` operand from an earlier position of ``r``.  Only placed variables
that still have unplaced consumers can matter later, which makes the states
small enough to memoize.  Counts are for labeled PUs; states are keyed
independently of PU labels.
"""

from __future__ import annotations

from .model import BasicBlock

# memo budget in bytes for the compiled counter, table growth included
MAX_MEMORY = 4_000_000_000


class StateLimit(RuntimeError):
    """The memo outgrew its state budget."""


class LayerCounter:
    """Number of schedules on exactly ``k`` nonempty PUs with cost at most ``c``."""

    def __init__(self, bb: BasicBlock, k: int):
        self.bb = bb
        self.n = n = bb.n_vars
        self.k = k
        self.ops = [bb.defs.get(v) for v in range(n)]
        self.cons_mask = [sum(1 << c for c in bb.consumers[v]) for v in range(n)]
        side_users = [[0, 0] for _ in range(n)]
        for x, (a, b) in bb.defs.items():
            side_users[a][0] |= 1 << x
            side_users[b][1] |= 1 << x
        self.side_users = side_users
        tail = [0] * n
        for v in reversed(bb.topo_order):
            tail[v] = max((1 + tail[c] for c in bb.consumers[v]), default=0)
        self.tail = tail
        self.full = (1 << n) - 1
        self.memo: dict = {}

    def count(self, c: int, *, compiled: bool | None = None, exists: bool = False,
              max_memory: int = MAX_MEMORY) -> int:
        """Schedules of cost at most ``c``; with ``exists`` only 0 or 1."""
        self.memo = {}
        self.c = c
        self._exists = exists
        if self.k < 1 or self.k > self.n:
            return 0
        if compiled is None:
            compiled = self.n <= 62
        if compiled:
            from . import _layered_jit

            res = _layered_jit.run(self.ops, self.cons_mask, self.side_users, self.tail,
                                   self.bb.topo_order, self.k, c,
                                   _layered_jit.state_budget(self.n, self.k, max_memory),
                                   exists=exists)
            if res is not None:
                return res
        pus = tuple((False, False, (), 0, 0) for _ in range(self.k))
        res = self._count(1, 0, 0, pus)
        return min(res, 1) if exists else res

    def exists(self, c: int, **kw) -> bool:
        return bool(self.count(c, exists=True, **kw))

    def min_cost(self, lower: int, upper: int, **kw) -> int | None:
        """Smallest ``c`` in ``lower..upper`` reachable on exactly ``k`` PUs."""
        for c in range(lower, upper + 1):
            if self.exists(c, **kw):
                return c
        return None

    # A PU is (nonempty, last finished in previous layer, relevant vars in
    # order, blocked left-operand vars, blocked right-operand vars).

    def _feasible(self, t: int, placed: int, pus: tuple) -> bool:
        """Critical-path and pigeonhole bounds for finishing by ``c``.

        At most ``k`` variables finish per layer, so the vars whose deadline is
        ``<= d`` must fit in layers ``t..d`` and those that cannot start before
        ``e`` must fit in layers ``e..c``.
        """
        est = {}
        c, k = self.c, self.k
        by_deadline = [0] * (c + 2)
        by_release = [0] * (c + 2)
        for v in self.bb.topo_order:
            if placed >> v & 1:
                continue
            e = t
            ops = self.ops[v]
            if ops:
                for o in ops:
                    if not placed >> o & 1 and est[o] + 1 > e:
                        e = est[o] + 1
            d = c - self.tail[v]
            if e > d:
                return False
            if ops:
                # an operand blocked on every PU stays blocked forever
                a, b = ops
                if not any(
                    not (placed >> a & 1 and bl >> a & 1) and not (placed >> b & 1 and br >> b & 1)
                    for _, _, _, bl, br in pus
                ):
                    return False
            est[v] = e
            by_deadline[d] += 1
            by_release[e] += 1
        acc = 0
        for d in range(t, c + 1):
            acc += by_deadline[d]
            if acc > k * (d - t + 1):
                return False
        acc = 0
        for e in range(c, t - 1, -1):
            acc += by_release[e]
            if acc > k * (c - e + 1):
                return False
        return True

    def _count(self, t: int, placed: int, last: int, pus: tuple) -> int:
        if placed == self.full:
            return 1 if all(p[0] for p in pus) else 0
        if t > self.c:
            return 0
        unplaced = self.full & ~placed
        self._unplaced = unplaced
        empty = sum(1 for p in pus if not p[0])
        if empty > bin(unplaced).count("1"):
            return 0
        key = (t, placed, self._tight_ready(placed, last), tuple(sorted(map(self._pu_key, pus))))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        total = 0
        for chosen in self._layers(t, placed, last, pus):
            nxt = self._advance(placed, pus, chosen)
            if nxt is None:
                continue
            nplaced, nlast, npus = nxt
            if self._feasible(t + 1, nplaced, npus):
                total += self._count(t + 1, nplaced, nlast, npus)
                if total and self._exists:
                    break
        self.memo[key] = total
        return total

    def _pu_key(self, pu: tuple) -> tuple:
        # blocking is per side, so only the order within each side's readers matters
        nonempty, lt, rel, bl, br = pu
        return nonempty, lt, self._side_order(rel, 0), self._side_order(rel, 1), bl, br

    def _side_order(self, rel, side):
        un = self._unplaced
        su = self.side_users
        return tuple(u for u in rel if su[u][side] & un)

    def _tight_ready(self, placed: int, last: int) -> int:
        """Ready vars with an operand from the previous layer; all ``last`` can still affect."""
        out = 0
        for v, o in enumerate(self.ops):
            if o is not None and not placed >> v & 1 and placed >> o[0] & 1 and placed >> o[1] & 1:
                if last >> o[0] & 1 or last >> o[1] & 1:
                    out |= 1 << v
        return out

    def _layers(self, t: int, placed: int, last: int, pus: tuple):
        """All nonempty injective maps of ready variables to PUs for layer ``t``."""
        ops = self.ops
        pos = {}
        for p, (_, _, rel, _, _) in enumerate(pus):
            for i, v in enumerate(rel):
                pos[v] = (p, i)
        ready = []
        forced = 0
        for v in range(self.n):
            if placed >> v & 1:
                continue
            o = ops[v]
            if o is not None and not (placed >> o[0] & 1 and placed >> o[1] & 1):
                continue
            op_tight = o is not None and bool(last >> o[0] & 1 or last >> o[1] & 1)
            opts = []
            for p, (nonempty, last_tight, _, bl, br) in enumerate(pus):
                if not (op_tight or last_tight or (t == 1 and not nonempty)):
                    continue
                if o is not None and (bl >> o[0] & 1 or br >> o[1] & 1):
                    continue
                opts.append(p)
            if t + self.tail[v] >= self.c:
                if not opts:
                    return
                forced |= 1 << v
            if opts:
                ready.append((v, opts))

        chosen: list[tuple[int, int]] = []
        used = [False] * self.k

        def rec(i):
            if i == len(ready):
                if chosen:
                    yield tuple(chosen)
                return
            v, opts = ready[i]
            if not forced >> v & 1:
                yield from rec(i + 1)
            for p in opts:
                if not used[p]:
                    used[p] = True
                    chosen.append((v, p))
                    yield from rec(i + 1)
                    chosen.pop()
                    used[p] = False

        yield from rec(0)

    def _advance(self, placed: int, pus: tuple, chosen):
        ops = self.ops
        where = {}
        for p, (_, _, rel, _, _) in enumerate(pus):
            for i, v in enumerate(rel):
                where[v] = (p, i)
        nplaced = placed
        nlast = 0
        for v, _ in chosen:
            nplaced |= 1 << v
            nlast |= 1 << v
        unplaced = self.full & ~nplaced
        by_pu = {p: v for v, p in chosen}
        out = []
        for p, (nonempty, _, rel, bl, br) in enumerate(pus):
            v = by_pu.get(p)
            if v is None:
                out.append((nonempty, False, rel, bl, br))
                continue
            o = ops[v]
            if o is not None:
                r, i = where[o[0]]
                for u in pus[r][2][:i]:
                    bl |= 1 << u
                r, i = where[o[1]]
                for u in pus[r][2][:i]:
                    br |= 1 << u
            out.append((True, True, rel + (v,), bl, br))
        # forget variables no unplaced consumer reads
        su = self.side_users
        keep = 0
        rel_l = rel_r = 0
        npus = []
        for nonempty, lt, rel, bl, br in out:
            nrel = []
            for u in rel:
                if self.cons_mask[u] & unplaced:
                    nrel.append(u)
                    keep |= 1 << u
                    if su[u][0] & unplaced:
                        rel_l |= 1 << u
                    if su[u][1] & unplaced:
                        rel_r |= 1 << u
            npus.append((nonempty, lt, tuple(nrel), bl, br))
        npus = tuple((ne, lt, rel, bl & rel_l, br & rel_r) for ne, lt, rel, bl, br in npus)
        return nplaced, nlast & keep, npus


def count_bounded(bb: BasicBlock, k: int, c: int) -> int:
    return LayerCounter(bb, k).count(c)


def min_cost_count(bb: BasicBlock, k: int, lower: int, upper: int) -> tuple[int, int] | None:
    """Smallest cost in ``lower..upper`` with schedules on exactly ``k`` PUs, and their count."""
    lc = LayerCounter(bb, k)
    c = lc.min_cost(lower, upper)
    return None if c is None else (c, lc.count(c))
