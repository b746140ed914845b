"""Solve a few seeded random blocks of growing size and time each one."""

import time

from scadsched import Objective, depth, solve
from scadsched.blockgen import corpus

for n in (8, 12, 16):
    for name, bb in corpus(n, 4, 3, seed=42):
        t0 = time.perf_counter()
        r = solve(bb, Objective("lex-pu-time"))
        dt = time.perf_counter() - t0
        print(f"{name:14s} depth={depth(bb):2d} pus={r.best_pus} cost={r.best_cost:2d} "
              f"schedules={r.count_total:>12,d}  {dt:7.3f}s")
