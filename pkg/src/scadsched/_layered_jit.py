"""Compiled core of :class:`scadsched.layered.LayerCounter`.

Same recursion as the Python version with flat arrays for the PU records and
an open-addressing memo keyed by the full canonical state (rows of int64, no
fingerprints).  Counts are int64; a float shadow sum detects overflow, in which
case the caller falls back to Python integers.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numba.typed import List

from .layered import StateLimit

# Scalars live in ``P`` and the arrays in the tuple ``D`` so every function
# can be cached on disk.  The memo is ``T[0]``: rows of key words followed by
# an occupied flag and the value; it is replaced by a larger array on growth.
N, K, C, FULL, WPL, REC, WIDTH, SIZE, OVERFLOW, LIMIT, ABORT, EXIST = range(12)
OPS_L, OPS_R, CONS, SU_L, SU_R, TAIL, TOPO = range(7)


@njit(cache=True, error_model="numpy")
def _hash(key):
    h = np.uint64(0x9E3779B97F4A7C15)
    for w in key:
        h ^= np.uint64(w) + np.uint64(0x9E3779B97F4A7C15) + (h << np.uint64(6)) + (h >> np.uint64(2))
        h *= np.uint64(0xBF58476D1CE4E5B9)
        h ^= h >> np.uint64(31)
    return h


@njit(cache=True, error_model="numpy")
def _lookup(tab, width, key):
    """Row of ``key`` in ``tab``; ``-(row+1)`` for the free row where it belongs."""
    cap = tab.shape[0]
    i = np.int64(_hash(key) & np.uint64(cap - 1))
    while True:
        if tab[i, width] == 0:
            return -(i + 1)
        same = True
        for j in range(width):
            if tab[i, j] != key[j]:
                same = False
                break
        if same:
            return i
        i = (i + 1) & (cap - 1)


@njit(cache=True, error_model="numpy")
def _store(P, T, key, val):
    width = P[WIDTH]
    tab = T[0]
    if 4 * (P[SIZE] + 1) > 3 * tab.shape[0]:
        big = np.zeros((2 * tab.shape[0], width + 2), np.int64)
        for i in range(tab.shape[0]):
            if tab[i, width]:
                row = -_lookup(big, width, tab[i, :width]) - 1
                big[row, :] = tab[i, :]
        T[0] = big
        tab = big
    row = _lookup(tab, width, key)
    if row < 0:
        row = -row - 1
        tab[row, :width] = key
        tab[row, width] = 1
        P[SIZE] += 1
        if P[SIZE] > P[LIMIT]:
            P[ABORT] = 1
    tab[row, width + 1] = val


@njit(cache=True, error_model="numpy")
def _record_less(key, a, b, rec):
    for j in range(rec):
        x, y = key[a + j], key[b + j]
        if x != y:
            return x < y
    return False


# Workspace tuple: per-layer PU records, per-layer scratch, keys, bound buffers.
W_NE, W_LT, W_BL, W_BR, W_RLEN, W_REL, W_SC, W_BYPU, W_KEY, W_FE, W_FC = range(11)
FC_BITS = 18
SC_READY, SC_OPTS, SC_FORCED, SC_CHOICE, SC_WP, SC_WI = range(6)


@njit(cache=True, error_model="numpy")
def _make_key(P, D, W, t, placed, last):
    n, k, rec, wpl = P[N], P[K], P[REC], P[WPL]
    ops_l, ops_r, su_l, su_r = D[OPS_L], D[OPS_R], D[SU_L], D[SU_R]
    ne, lt, bl, br, rlen, rel = W[W_NE][t], W[W_LT][t], W[W_BL][t], W[W_BR][t], W[W_RLEN][t], W[W_REL][t]
    unplaced = P[FULL] & ~placed
    key = W[W_KEY][t]
    key[:] = 0
    key[0] = t
    key[1] = placed
    tight = np.int64(0)
    for v in range(n):
        a = ops_l[v]
        if a < 0 or (placed >> v) & 1:
            continue
        b = ops_r[v]
        if (placed >> a) & 1 and (placed >> b) & 1 and ((last >> a) & 1 or (last >> b) & 1):
            tight |= np.int64(1) << v
    key[2] = tight
    for p in range(k):
        base = 3 + p * rec
        key[base] = ne[p] | (lt[p] << 1)
        key[base + 1] = bl[p]
        key[base + 2] = br[p]
        cl = 0
        cr = 0
        for i in range(rlen[p]):
            u = rel[p, i]
            if su_l[u] & unplaced:
                key[base + 3 + cl // 10] |= np.int64(u + 1) << (6 * (cl % 10))
                cl += 1
            if su_r[u] & unplaced:
                key[base + 3 + wpl + cr // 10] |= np.int64(u + 1) << (6 * (cr % 10))
                cr += 1
    # sort PU records so the key does not depend on PU labels
    for i in range(1, k):
        j = i
        while j > 0 and _record_less(key, 3 + j * rec, 3 + (j - 1) * rec, rec):
            a = 3 + j * rec
            b = 3 + (j - 1) * rec
            for x in range(rec):
                key[a + x], key[b + x] = key[b + x], key[a + x]
            j -= 1
    return key


@njit(cache=True, error_model="numpy")
def _unblocked(P, D, W, t, placed):
    """An operand blocked on every PU stays blocked forever."""
    n, k = P[N], P[K]
    ops_l, ops_r = D[OPS_L], D[OPS_R]
    bl, br = W[W_BL][t], W[W_BR][t]
    for v in range(n):
        a = ops_l[v]
        if a < 0 or (placed >> v) & 1:
            continue
        b = ops_r[v]
        ok = False
        for p in range(k):
            if (not ((placed >> a) & 1 and (bl[p] >> a) & 1)
                    and not ((placed >> b) & 1 and (br[p] >> b) & 1)):
                ok = True
                break
        if not ok:
            return False
    return True


@njit(cache=True, error_model="numpy")
def _timely(P, D, W, t, placed):
    """:func:`_timing` through a lossy direct-mapped cache."""
    fc = W[W_FC]
    h = np.int64((np.uint64(placed) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(t))
                 >> np.uint64(64 - FC_BITS))
    if fc[h, 0] == placed and fc[h, 1] == t:
        return fc[h, 2] == 1
    ok = _timing(P, D, W, t, placed)
    fc[h, 0] = placed
    fc[h, 1] = t
    fc[h, 2] = 1 if ok else 2
    return ok


@njit(cache=True, error_model="numpy")
def _timing(P, D, W, t, placed):
    """Critical-path and pigeonhole bounds: at most ``k`` vars finish per layer."""
    n, c, k = P[N], P[C], P[K]
    ops_l, ops_r, tail, topo = D[OPS_L], D[OPS_R], D[TAIL], D[TOPO]
    fe = W[W_FE]
    est, by_deadline, by_release = fe[0], fe[1], fe[2]
    by_deadline[:c + 2] = 0
    by_release[:c + 2] = 0
    for idx in range(n):
        v = topo[idx]
        if (placed >> v) & 1:
            continue
        e = t
        a = ops_l[v]
        if a >= 0:
            b = ops_r[v]
            if not (placed >> a) & 1 and est[a] + 1 > e:
                e = est[a] + 1
            if not (placed >> b) & 1 and est[b] + 1 > e:
                e = est[b] + 1
        d = c - tail[v]
        if e > d:
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


@njit(cache=True, error_model="numpy")
def _count(P, D, T, W, t, placed, last):
    n, k, c = P[N], P[K], P[C]
    ops_l, ops_r, cons, su_l, su_r, tail = D[OPS_L], D[OPS_R], D[CONS], D[SU_L], D[SU_R], D[TAIL]
    ne, lt, bl, br, rlen, rel = W[W_NE][t], W[W_LT][t], W[W_BL][t], W[W_BR][t], W[W_RLEN][t], W[W_REL][t]
    full = P[FULL]
    if P[ABORT]:
        return np.int64(0)
    if placed == full:
        for p in range(k):
            if ne[p] == 0:
                return np.int64(0)
        return np.int64(1)
    if t > c:
        return np.int64(0)
    unplaced = full & ~placed
    empty = 0
    for p in range(k):
        if ne[p] == 0:
            empty += 1
    remaining = 0
    for v in range(n):
        if (unplaced >> v) & 1:
            remaining += 1
    if empty > remaining:
        return np.int64(0)
    key = _make_key(P, D, W, t, placed, last)
    row = _lookup(T[0], P[WIDTH], key)
    if row >= 0:
        return T[0][row, P[WIDTH] + 1]

    sc = W[W_SC][t]
    ready, opts, forced, choice, where_p, where_i = (
        sc[SC_READY], sc[SC_OPTS], sc[SC_FORCED], sc[SC_CHOICE], sc[SC_WP], sc[SC_WI])
    # ready variables and the PUs each may join in this layer
    r = 0
    dead = False
    for v in range(n):
        if (placed >> v) & 1:
            continue
        a = ops_l[v]
        b = ops_r[v]
        if a >= 0 and not ((placed >> a) & 1 and (placed >> b) & 1):
            continue
        op_tight = a >= 0 and (((last >> a) & 1) or ((last >> b) & 1))
        m = np.int64(0)
        for p in range(k):
            if not (op_tight or lt[p] or (t == 1 and ne[p] == 0)):
                continue
            if a >= 0 and (((bl[p] >> a) & 1) or ((br[p] >> b) & 1)):
                continue
            m |= np.int64(1) << p
        must = t + tail[v] >= c
        if must and m == 0:
            dead = True
            break
        if m:
            ready[r] = v
            opts[r] = m
            forced[r] = 1 if must else 0
            r += 1

    total = np.int64(0)
    ftotal = 0.0
    if not dead and r > 0:
        for p in range(k):
            for i in range(rlen[p]):
                where_p[rel[p, i]] = p
                where_i[rel[p, i]] = i
        ne2, lt2, bl2, br2 = W[W_NE][t + 1], W[W_LT][t + 1], W[W_BL][t + 1], W[W_BR][t + 1]
        rlen2, rel2 = W[W_RLEN][t + 1], W[W_REL][t + 1]
        by_pu = W[W_BYPU][t]
        # odometer over choices: -1 skips the var, p >= 0 puts it on PU p
        choice[:r] = -2
        used = np.int64(0)
        i = 0
        while i >= 0:
            if i == r:
                if used != 0:
                    nplaced = placed
                    nlast = np.int64(0)
                    by_pu[:] = -1
                    for j in range(r):
                        if choice[j] >= 0:
                            v = ready[j]
                            nplaced |= np.int64(1) << v
                            nlast |= np.int64(1) << v
                            by_pu[choice[j]] = v
                    if not _timely(P, D, W, t + 1, nplaced):
                        i -= 1
                        continue
                    nun = full & ~nplaced
                    keep = np.int64(0)
                    rel_l = np.int64(0)
                    rel_r = np.int64(0)
                    for p in range(k):
                        v = by_pu[p]
                        ne2[p] = ne[p]
                        lt2[p] = 0
                        bl2[p] = bl[p]
                        br2[p] = br[p]
                        extra = 0
                        if v >= 0:
                            extra = 1
                            ne2[p] = 1
                            lt2[p] = 1
                            a = ops_l[v]
                            if a >= 0:
                                q = where_p[a]
                                for x in range(where_i[a]):
                                    bl2[p] |= np.int64(1) << rel[q, x]
                                b = ops_r[v]
                                q = where_p[b]
                                for x in range(where_i[b]):
                                    br2[p] |= np.int64(1) << rel[q, x]
                        m = 0
                        for x in range(rlen[p] + extra):
                            u = rel[p, x] if x < rlen[p] else v
                            if cons[u] & nun:
                                rel2[p, m] = u
                                m += 1
                                keep |= np.int64(1) << u
                                if su_l[u] & nun:
                                    rel_l |= np.int64(1) << u
                                if su_r[u] & nun:
                                    rel_r |= np.int64(1) << u
                        rlen2[p] = m
                    for p in range(k):
                        bl2[p] &= rel_l
                        br2[p] &= rel_r
                    if _unblocked(P, D, W, t + 1, nplaced):
                        sub = _count(P, D, T, W, t + 1, nplaced, nlast & keep)
                        total += sub
                        ftotal += float(sub)
                        if P[EXIST] and total:
                            break
                i -= 1
                continue
            if choice[i] >= 0:
                used &= ~(np.int64(1) << choice[i])
            cnd = choice[i] + 1
            found = False
            while cnd < k:
                if cnd == -1:
                    if forced[i] == 0:
                        found = True
                        break
                elif ((opts[i] >> cnd) & 1) and not ((used >> cnd) & 1):
                    found = True
                    break
                cnd += 1
            if found:
                choice[i] = cnd
                if cnd >= 0:
                    used |= np.int64(1) << cnd
                i += 1
                if i < r:
                    choice[i] = -2
            else:
                choice[i] = -2
                i -= 1
    if ftotal > 4.0e18:
        P[OVERFLOW] = 1
    _store(P, T, key, total)
    return total


def state_budget(n: int, k: int, max_memory: int) -> int:
    """Most states whose table, while doubling, fits in ``max_memory`` bytes."""
    row = 8 * (3 + k * (3 + 2 * ((n + 9) // 10)) + 2)
    cap = 1 << 12
    while 3 * cap * row <= max_memory:
        cap *= 2
    return 3 * cap // 4


def run(ops, cons_mask, side_users, tail, topo, k: int, c: int, max_states: int = 8_000_000,
        exists: bool = False) -> int | None:
    """Count with the compiled core; ``None`` when int64 could overflow.

    With ``exists`` the search stops at the first schedule and returns 0 or 1.
    """
    n = len(ops)
    arr = lambda xs: np.array(xs, np.int64)  # noqa: E731
    D = (
        arr([o[0] if o else -1 for o in ops]),
        arr([o[1] if o else -1 for o in ops]),
        arr(cons_mask),
        arr([s[0] for s in side_users]),
        arr([s[1] for s in side_users]),
        arr(tail),
        arr(topo),
    )
    wpl = (n + 9) // 10
    rec = 3 + 2 * wpl
    width = 3 + k * rec
    P = arr([n, k, c, (1 << n) - 1, wpl, rec, width, 0, 0, max_states, 0, int(exists)])
    T = List()
    T.append(np.zeros((1 << 12, width + 2), np.int64))
    depth = c + 2
    W = (
        np.zeros((depth, k), np.int64),
        np.zeros((depth, k), np.int64),
        np.zeros((depth, k), np.int64),
        np.zeros((depth, k), np.int64),
        np.zeros((depth, k), np.int64),
        np.zeros((depth, k, n), np.int64),
        np.zeros((depth, 6, n), np.int64),
        np.zeros((depth, k), np.int64),
        np.zeros((depth, width), np.int64),
        np.zeros((3, max(n, c + 2)), np.int64),
        np.full((1 << FC_BITS, 3), -1, np.int64),
    )
    res = _count(P, D, T, W, 1, np.int64(0), np.int64(0))
    if P[ABORT]:
        raise StateLimit(f"more than {max_states} states")
    if P[OVERFLOW]:
        return None
    return min(int(res), 1) if exists else int(res)
