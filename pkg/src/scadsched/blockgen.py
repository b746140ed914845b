"""Seeded random basic blocks with a given number of variables and levels.

Generation is fully specified so any implementation reproduces it bit for bit:

PRNG: SplitMix64.  With 64-bit wrap-around arithmetic::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

``below(m)`` draws ``x`` until ``x < 2**64 - (2**64 % m)`` and returns ``x % m``.

Shape: choose ``levels - 1`` distinct cut points in ``1..n-1`` with a partial
Fisher-Yates shuffle of ``[1, .., n-1]`` (for ``i`` in ``0..levels-2`` swap
position ``i`` with ``i + below(n - 1 - i)``), sort them, and split the ``n``
variables ``x0 .. x{n-1}`` into consecutive levels at the cuts.  Level 1 holds
the leaves.  Each variable on level ``j >= 2`` draws its left operand uniformly
from level ``j - 1`` and then its right operand uniformly from all variables on
levels ``1 .. j-1``.  Leaves that end up unused are declared with ``var/1``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import BasicBlock

MASK64 = (1 << 64) - 1


class InfeasibleParams(ValueError):
    pass


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, m: int) -> int:
        if m <= 0:
            raise ValueError("below() needs m >= 1")
        limit = (1 << 64) - ((1 << 64) % m)
        while True:
            x = self.next()
            if x < limit:
                return x % m


@dataclass(frozen=True)
class GenParams:
    n: int
    levels: int
    seed: int = 0

    def check(self) -> None:
        if self.n < 1 or self.levels < 1 or self.levels > self.n:
            raise InfeasibleParams(f"need 1 <= levels <= n, got n={self.n} levels={self.levels}")
        if not 0 <= self.seed <= MASK64:
            raise InfeasibleParams("seed must be an unsigned 64-bit integer")


def level_sizes(rng: SplitMix64, n: int, levels: int) -> list[int]:
    points = list(range(1, n))
    for i in range(levels - 1):
        j = i + rng.below(n - 1 - i)
        points[i], points[j] = points[j], points[i]
    cuts = sorted(points[: levels - 1])
    bounds = [0] + cuts + [n]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def random_block(params: GenParams) -> BasicBlock:
    params.check()
    rng = SplitMix64(params.seed)
    sizes = level_sizes(rng, params.n, params.levels)
    names = [f"x{i}" for i in range(params.n)]
    start = 0
    levels = []
    for size in sizes:
        levels.append(list(range(start, start + size)))
        start += size
    facts = []
    used = set()
    lower = list(levels[0])
    for j in range(1, len(levels)):
        prev = levels[j - 1]
        for x in levels[j]:
            left = prev[rng.below(len(prev))]
            right = lower[rng.below(len(lower))]
            used.update((left, right))
            facts.append((names[x], names[left], names[right]))
        lower.extend(levels[j])
    for x in levels[0]:
        if x not in used:
            facts.append((names[x],))
    return BasicBlock.from_facts(facts)


def corpus(n: int, levels: int, count: int, seed: int = 0) -> list[tuple[str, BasicBlock]]:
    """``count`` blocks named ``n{n}_l{l}_s{seed}``; instance seeds are ``seed + i``."""
    out = []
    for i in range(count):
        s = (seed + i) & MASK64
        out.append((f"n{n}_l{levels}_s{s}", random_block(GenParams(n, levels, s))))
    return out
