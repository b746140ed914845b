"""Exact search over overhead-free schedules.

Variables are placed one at a time in a topological order of the initial DAG.
Each placement inserts the variable into some PU sequence at a position that
keeps every pairwise constraint satisfied; all constraints between two placed
variables only depend on their relative order and on the relative order of
their (already placed) operands, so a violated prefix can never be repaired.

PUs are opened in order (restricted growth), which yields exactly one
representative per PU-permutation orbit; full counts are ``canonical * k!``.
When a time objective or bound is active the longest path of the partial
combined graph is maintained incrementally and used, together with the
critical path still to come, as a lower bound.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from typing import Mapping

from .model import BasicBlock, predecessors
from .schedule import Schedule, SolverBounds, canonical_form

MIN_PUS = "min-pus"
MIN_TIME = "min-time"
LEX_PU_TIME = "lex-pu-time"
LEX_TIME_PU = "lex-time-pu"
VARIANTS = (MIN_PUS, MIN_TIME, LEX_PU_TIME, LEX_TIME_PU)

INF = sys.maxsize


class InvalidObjective(ValueError):
    pass


class _Found(Exception):
    pass


class _Search:
    """Depth-first search over canonical schedules on exactly ``k`` PUs."""

    def __init__(self, bb: BasicBlock, k: int, *, acyclic=False, bound=None, weights=None,
                 mode="count", optimize=False):
        self.bb = bb
        self.n = n = bb.n_vars
        self.k = k
        self.order = bb.topo_order
        self.ops = [bb.defs.get(v) for v in range(n)]
        self.pred = predecessors(bb).masks
        self.w = [1] * n if weights is None else [int(weights.get(nm, 1)) for nm in bb.names]
        self.consumers = bb.consumers
        tail = [0] * n
        for v in reversed(self.order):
            tail[v] = max((self.w[c] + tail[c] for c in self.consumers[v]), default=0)
        self.tail = tail
        self.lb0 = max(self.w[v] + tail[v] for v in range(n)) if n else 0
        # Without a bound we still need incremental cost tracking to reject
        # cycles or to minimize.
        self.track = acyclic or bound is not None or optimize
        self.optimize = optimize
        self.bound = INF if bound is None else bound
        self.mode = mode
        self.best = INF
        self.count = 0
        self.found: list[Schedule] = []
        self.pu_of = [-1] * n
        self.seqs: list[list[int]] = [[] for _ in range(k)]
        self.after = [0] * n
        self.fin = [0] * n

    # -- state updates -------------------------------------------------

    def _legal(self, v: int, p: int) -> tuple[int, int]:
        seq = self.seqs[p]
        lo, hi = 0, len(seq)
        pm = self.pred[v]
        opv = self.ops[v]
        ops, pu_of, after = self.ops, self.pu_of, self.after
        for j, w in enumerate(seq):
            if pm >> w & 1:
                lo = j + 1
            if opv is not None:
                opw = ops[w]
                if opw is not None:
                    for s in (0, 1):
                        a = opv[s]
                        b = opw[s]
                        if a != b and pu_of[a] == pu_of[b]:
                            if after[a] >> b & 1:
                                if j < hi:
                                    hi = j
                            elif j + 1 > lo:
                                lo = j + 1
        return lo, hi

    def _insert(self, v: int, p: int, i: int) -> None:
        seq = self.seqs[p]
        bit = 1 << v
        mask = 0
        for u in seq[i:]:
            mask |= 1 << u
        self.after[v] = mask
        after = self.after
        for u in seq[:i]:
            after[u] |= bit
        seq.insert(i, v)
        self.pu_of[v] = p

    def _remove(self, v: int, p: int, i: int) -> None:
        seq = self.seqs[p]
        del seq[i]
        nbit = ~(1 << v)
        after = self.after
        for u in seq[:i]:
            after[u] &= nbit
        self.after[v] = 0
        self.pu_of[v] = -1

    def _propagate(self, v: int, p: int, i: int, lb: int, undo: list) -> int:
        """Update longest-path values after inserting ``v``; returns the new lower
        bound or -1 when a cycle appeared or the bound is exceeded."""
        fin, w, tail = self.fin, self.w, self.tail
        seq = self.seqs[p]
        base = fin[seq[i - 1]] if i > 0 else 0
        opv = self.ops[v]
        if opv is not None:
            a, b = fin[opv[0]], fin[opv[1]]
            if a > base:
                base = a
            if b > base:
                base = b
        fin[v] = base + w[v]
        undo.append((v, 0))
        val = fin[v] + tail[v]
        if val > lb:
            lb = val
        bound = self.bound
        if lb > bound:
            return -1
        if i + 1 >= len(seq):
            return lb
        pu_of, seqs, consumers = self.pu_of, self.seqs, self.consumers
        stack = [(seq[i + 1], fin[v])]
        while stack:
            x, src = stack.pop()
            cand = src + w[x]
            if cand <= fin[x]:
                continue
            if x == v:
                return -1
            undo.append((x, fin[x]))
            fin[x] = cand
            val = cand + tail[x]
            if val > lb:
                lb = val
                if lb > bound:
                    return -1
            sx = seqs[pu_of[x]]
            j = sx.index(x)
            if j + 1 < len(sx):
                stack.append((sx[j + 1], cand))
            for c in consumers[x]:
                if pu_of[c] >= 0:
                    stack.append((c, cand))
        return lb

    # -- search --------------------------------------------------------

    def children(self, d: int, opened: int):
        """Legal (pu, position) choices for the ``d``-th variable."""
        v = self.order[d]
        k = self.k
        rest = self.n - d - 1
        out = []
        top = opened + 1 if opened < k else k
        for p in range(top):
            now_open = opened + (p == opened)
            if rest < k - now_open:
                continue
            lo, hi = self._legal(v, p)
            for i in range(hi, lo - 1, -1):
                out.append((p, i))
        return out

    def replay(self, prefix) -> tuple[int, int, int] | None:
        """Apply a list of (pu, position) choices; returns (depth, opened, lb)."""
        opened, lb = 0, self.lb0
        for d, (p, i) in enumerate(prefix):
            v = self.order[d]
            self._insert(v, p, i)
            if p == opened:
                opened += 1
            if self.track:
                lb = self._propagate(v, p, i, lb, [])
                if lb < 0:
                    return None
        return len(prefix), opened, lb

    def run(self, d: int = 0, opened: int = 0, lb: int | None = None) -> None:
        if lb is None:
            lb = self.lb0
        if lb > self.bound:
            return
        try:
            self._dfs(d, opened, lb)
        except _Found:
            pass

    def _dfs(self, d: int, opened: int, lb: int) -> None:
        if d == self.n:
            self._leaf()
            return
        v = self.order[d]
        track = self.track
        fin = self.fin
        for p, i in self.children(d, opened):
            self._insert(v, p, i)
            if track:
                undo: list = []
                nlb = self._propagate(v, p, i, lb, undo)
                if nlb >= 0:
                    self._dfs(d + 1, opened + (p == opened), nlb)
                for x, old in reversed(undo):
                    fin[x] = old
            else:
                self._dfs(d + 1, opened + (p == opened), lb)
            self._remove(v, p, i)

    def _leaf(self) -> None:
        if self.track:
            c = max(self.fin)
            if c > self.bound:
                return
            if self.optimize and c < self.best:
                self.best = c
                self.bound = c
                self.count = 0
                self.found = []
            elif not self.optimize:
                self.best = min(self.best, c)
        self.count += 1
        if self.mode == "collect":
            self.found.append(Schedule(self.seqs))
        elif self.mode == "first":
            self.found.append(Schedule(self.seqs))
            raise _Found


@dataclass
class _Outcome:
    count: int = 0
    best: int = INF
    found: list = field(default_factory=list)


def _frontier(bb: BasicBlock, k: int, width: int):
    """Prefixes of choices splitting the tree into at least ``width`` subtrees."""
    level = [[]]
    d = 0
    while len(level) < width and d < bb.n_vars - 1:
        nxt = []
        for prefix in level:
            s = _Search(bb, k)
            st = s.replay(prefix)
            if st is not None:
                nxt.extend(prefix + [ch] for ch in s.children(d, st[1]))
        level = nxt
        d += 1
    return level


def _run_subtree(args) -> _Outcome:
    bb, k, kw, prefix = args
    s = _Search(bb, k, **kw)
    st = s.replay(prefix)
    if st is None:
        return _Outcome()
    s.run(*st)
    return _Outcome(s.count, s.best, s.found)


def _search(bb: BasicBlock, k: int, *, jobs: int = 1, **kw) -> _Outcome:
    """Run one search on exactly ``k`` PUs, optionally split over processes."""
    if k < 1 or k > bb.n_vars:
        return _Outcome()
    if jobs <= 1 or kw.get("mode") == "first":
        s = _Search(bb, k, **kw)
        s.run()
        return _Outcome(s.count, s.best, s.found)
    prefixes = _frontier(bb, k, 4 * jobs)
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        parts = list(ex.map(_run_subtree, [(bb, k, kw, pf) for pf in prefixes]))
    if kw.get("optimize"):
        best = min((o.best for o in parts), default=INF)
        parts = [o for o in parts if o.best == best and o.count]
    else:
        best = min((o.best for o in parts), default=INF)
    out = _Outcome(sum(o.count for o in parts), best)
    for o in parts:
        out.found.extend(o.found)
    return out


def _expand(schedules, canonical_only: bool):
    """Map search representatives to canonical forms, or to their full PU orbits."""
    out = []
    for s in schedules:
        if canonical_only:
            out.append(canonical_form(s))
        else:
            for perm in permutations(s.sequences):
                out.append(Schedule(perm))
    return out


def enumerate_valid(bb: BasicBlock, k: int, canonical_only: bool = False, collect: bool = True,
                    *, acyclic: bool = False, time_bound: int | None = None,
                    weights: Mapping[str, int] | None = None, jobs: int = 1):
    """All valid schedules using exactly ``k`` nonempty PUs.

    Returns the list of schedules when ``collect`` is true, else their number.
    """
    if k < 1 or k > bb.n_vars:
        return [] if collect else 0
    if not collect and _unit(weights) and (acyclic or time_bound is not None):
        from .layered import LayerCounter

        total = LayerCounter(bb, k).count(bb.n_vars if time_bound is None else time_bound)
        return total // math.factorial(k) if canonical_only else total
    res = _search(bb, k, mode="collect" if collect else "count", acyclic=acyclic,
                  bound=time_bound, weights=weights, jobs=jobs)
    if not collect:
        return res.count if canonical_only else res.count * math.factorial(k)
    return _expand(res.found, canonical_only)


def count_valid(bb: BasicBlock, k: int, **kw) -> tuple[int, int]:
    """(total, canonical) number of valid schedules on exactly ``k`` PUs."""
    canon = enumerate_valid(bb, k, canonical_only=True, collect=False, **kw)
    return canon * math.factorial(k), canon


@dataclass(frozen=True)
class Objective:
    variant: str = MIN_PUS
    pus: int | None = None
    bounds: SolverBounds = SolverBounds()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidObjective(f"unknown objective {self.variant!r}")
        if self.variant == MIN_TIME and (self.pus is None or self.pus < 1):
            raise InvalidObjective("min-time needs a PU count >= 1")


@dataclass
class OptResult:
    feasible: bool
    best_pus: int | None = None
    best_cost: int | None = None
    count_total: int = 0
    count_canonical: int = 0
    schedules: list[Schedule] | None = None

    def to_dict(self, bb: BasicBlock | None = None) -> dict:
        d = {
            "feasible": self.feasible,
            "pus": self.best_pus,
            "cost": self.best_cost,
            "count": self.count_total,
            "canonical": self.count_canonical,
        }
        if self.schedules is not None and bb is not None:
            d["schedules"] = [{"pus": s.to_names(bb)} for s in self.schedules]
        return d


METHODS = ("auto", "dfs", "layered")


def _unit(weights) -> bool:
    return weights is None or all(int(w) == 1 for w in weights.values())


def solve(bb: BasicBlock, objective: Objective, *, collect: str = "none", acyclic: bool = False,
          weights: Mapping[str, int] | None = None, jobs: int = 1, method: str = "auto") -> OptResult:
    """Find optimal schedules.

    ``collect`` selects returned schedules: ``"none"``, ``"first"`` (one witness),
    ``"canonical"`` (all optimal, one per PU permutation orbit) or ``"all"``.
    ``acyclic`` additionally rejects cyclic combined graphs in the PU-only
    objective; objectives involving time always do.

    Counts of time-bounded schedules with unit weights come from the layered
    counter (:mod:`scadsched.layered`) unless ``method="dfs"``; everything else
    uses the depth-first search.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    bounds = objective.bounds
    variant = objective.variant
    timed = variant != MIN_PUS or bounds.time_bound is not None or acyclic
    if method == "layered" and not (_unit(weights) and timed):
        raise ValueError("the layered counter needs unit weights and acyclic schedules")
    if method != "dfs" and _unit(weights) and timed:
        return _solve_layered(bb, objective, collect, jobs)
    return _solve_dfs(bb, objective, collect, acyclic, weights, jobs)


def _solve_layered(bb, objective, collect, jobs) -> OptResult:
    from .layered import LayerCounter
    from .model import depth as _depth

    bounds = objective.bounds
    variant = objective.variant
    floor = _depth(bb)
    # every acyclic schedule with unit weights finishes within n steps
    top = bb.n_vars if bounds.time_bound is None else min(bounds.time_bound, bb.n_vars)
    kw = dict(jobs=jobs)

    def done(k, lc, cost):
        total = lc.count(cost)
        canon = total // math.factorial(k)
        return _finish(bb, k, cost, canon, collect, dict(bound=cost, acyclic=True, **kw))

    if variant == MIN_TIME:
        k = objective.pus
        if k > bb.n_vars:
            raise InvalidObjective(f"{k} PUs exceed the {bb.n_vars} variables")
        if bounds.pu_bound is not None and k > bounds.pu_bound:
            return OptResult(False)
        lc = LayerCounter(bb, k)
        cost = lc.min_cost(floor, top)
        return OptResult(False) if cost is None else done(k, lc, cost)

    ceiling = bounds.pu_ceiling(bb)
    if variant == MIN_PUS:
        for k in range(1, ceiling + 1):
            lc = LayerCounter(bb, k)
            if lc.exists(top):
                # the count covers every schedule within the bound, not only the cheapest
                cost = lc.min_cost(floor, top)
                total = lc.count(top)
                canon = total // math.factorial(k)
                return _finish(bb, k, cost, canon, collect, dict(bound=top, acyclic=True, **kw))
        return OptResult(False)

    if variant == LEX_PU_TIME:
        for k in range(1, ceiling + 1):
            lc = LayerCounter(bb, k)
            if lc.exists(top):
                return done(k, lc, lc.min_cost(floor, top))
        return OptResult(False)

    best = None
    for k in range(1, ceiling + 1):
        lc = LayerCounter(bb, k)
        cost = lc.min_cost(floor, top)
        if cost is not None:
            best = (k, lc, cost)
            if cost <= floor:
                break
            top = cost - 1
    return OptResult(False) if best is None else done(*best)


def _solve_dfs(bb, objective, collect, acyclic, weights, jobs) -> OptResult:
    bounds = objective.bounds
    variant = objective.variant
    ceiling = bounds.pu_ceiling(bb)
    tb = bounds.time_bound
    kw = dict(weights=weights, jobs=jobs)

    if variant == MIN_PUS:
        for k in range(1, ceiling + 1):
            out = _search(bb, k, mode="count", acyclic=acyclic, bound=tb, **kw)
            if out.count:
                cost = out.best if out.best != INF else None
                return _finish(bb, k, cost, out.count, collect,
                               dict(acyclic=acyclic, bound=tb, **kw))
        return OptResult(False)

    if variant == MIN_TIME:
        k = objective.pus
        if k > bb.n_vars:
            raise InvalidObjective(f"{k} PUs exceed the {bb.n_vars} variables")
        if bounds.pu_bound is not None and k > bounds.pu_bound:
            return OptResult(False)
        out = _search(bb, k, mode="count", optimize=True, bound=tb, **kw)
        if not out.count:
            return OptResult(False)
        return _finish(bb, k, out.best, out.count, collect, dict(bound=out.best, acyclic=True, **kw))

    if variant == LEX_PU_TIME:
        for k in range(1, ceiling + 1):
            out = _search(bb, k, mode="count", optimize=True, bound=tb, **kw)
            if out.count:
                return _finish(bb, k, out.best, out.count, collect,
                               dict(bound=out.best, acyclic=True, **kw))
        return OptResult(False)

    # LEX_TIME_PU: cheapest cost over all PU counts, then fewest PUs reaching it.
    from .model import depth as _depth

    floor = _depth(bb) if weights is None else _Search(bb, 1, weights=weights).lb0
    best = (INF, None, 0)
    limit = tb
    for k in range(1, ceiling + 1):
        out = _search(bb, k, mode="count", optimize=True, bound=limit, **kw)
        if out.count:
            best = (out.best, k, out.count)
            if out.best <= floor:
                break
            limit = out.best - 1
    cost, k, count = best
    if k is None:
        return OptResult(False)
    return _finish(bb, k, cost, count, collect, dict(bound=cost, acyclic=True, **kw))


def _finish(bb, k, cost, canon, collect, kw) -> OptResult:
    res = OptResult(True, k, cost, canon * math.factorial(k), canon)
    if collect == "none":
        return res
    mode = "first" if collect == "first" else "collect"
    kw = dict(kw)
    if mode == "first":
        kw.pop("jobs", None)
    found = _search(bb, k, mode=mode, **kw).found
    if collect == "all":
        res.schedules = _expand(found, False)
    else:
        res.schedules = _expand(found, True)
    return res


def min_pus(bb: BasicBlock, bounds: SolverBounds = SolverBounds(), **kw) -> int | None:
    res = solve(bb, Objective(MIN_PUS, bounds=bounds), **kw)
    return res.best_pus if res.feasible else None
