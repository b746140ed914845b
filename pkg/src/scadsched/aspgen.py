"""Answer set programming encoding of the scheduling problem.

The emitted rules follow the generate-and-test formulation one rule at a time
so an external grounder/solver can be used to cross-check :mod:`solver`.
Nothing here needs an ASP system; :func:`run_clingo` merely shells out to one
when it is installed.
"""

from __future__ import annotations

import re
import shutil
import subprocess
from dataclasses import dataclass, field

from .model import BasicBlock
from .schedule import Schedule, SolverBounds
from .solver import LEX_PU_TIME, LEX_TIME_PU, MIN_PUS, MIN_TIME, Objective


class AspError(ValueError):
    pass


class InconsistentModel(AspError):
    pass


class MissingAssignment(AspError):
    pass


_LOWER = re.compile(r"^[a-z][A-Za-z0-9_']*$|^[0-9]+$")


def term(name: str) -> str:
    """Variable names that are not valid ASP constants become string terms."""
    return name if _LOWER.match(name) else '"' + name.replace('"', '\\"') + '"'


def emit_facts(bb: BasicBlock) -> str:
    lines = []
    for fact in bb.facts:
        if len(fact) == 3:
            x, a, b = fact
            lines.append(f"operand({term(x)},{term(a)},{term(b)}).")
        else:
            lines.append(f"var({term(fact[0])}).")
    return "\n".join(lines) + "\n"


_HEADER = """\
% Overhead-free schedules for a buffered processing unit machine.
% Each unordered pair of variables on the same PU is ordered in exactly one
% direction by a choice rule; derived order atoms (operand preservation,
% transitivity) must agree with that choice or the candidate is rejected.
"""

_BASE = """\
var(X) :- operand(X,Y,Z).
var(Y) :- operand(X,Y,Z).
var(Z) :- operand(X,Y,Z).
amountVars(M) :- M = #count{ X : var(X) }.

pu(0..PUS-1) :- amountPUs(PUS).
possiblePUAmount(0..max_pus).
1 { amountPUs(N) : possiblePUAmount(N) } 1.

1 { asgn(VAR,PU) : pu(PU) } 1 :- var(VAR).
1 { order(V1,V2) ; order(V2,V1) } 1 :- asgn(V1,PU), asgn(V2,PU), V1 < V2.

order(V1L,V2L) :- asgn(V1,PU), asgn(V2,PU), V1 != V2, order(V1,V2),
    operand(V1,V1L,V1R), operand(V2,V2L,V2R),
    asgn(V1L,PU2), asgn(V2L,PU2), V1L != V2L.
order(V1R,V2R) :- asgn(V1,PU), asgn(V2,PU), V1 != V2, order(V1,V2),
    operand(V1,V1L,V1R), operand(V2,V2L,V2R),
    asgn(V1R,PU2), asgn(V2R,PU2), V1R != V2R.

node(X) :- var(X).
edge_initial(X,Y) :- operand(Y,X,_).
edge_initial(X,Y) :- operand(Y,_,X).
rootNode(X) :- not edge_initial(_,X), node(X).

predecessor(X,Y) :- edge_initial(X,Y).
predecessor(X,Z) :- predecessor(X,Y), predecessor(Y,Z).
:- predecessor(X,Y), asgn(X,PU), asgn(Y,PU), order(Y,X).

order(V1,V3) :- order(V1,V2), order(V2,V3).
"""

_SYMMETRY = """\
minimum(PU,S) :- S = #min{ VAR : asgn(VAR,PU) }, pu(PU), asgn(_,PU).
:- minimum(PU,S), minimum(PU2,S2), PU2 > PU, S > S2.
"""

_COST = """\
edge(X,Y) :- edge_initial(X,Y).
edge(X,Y) :- order(X,Y).
initialNode(X) :- not edge(_,X), node(X).

pathCosts(X,1) :- initialNode(X).
pathCosts(Y,N+1) :- edge(X,Y), pathCosts(X,N), N < (M+1), amountVars(M).
maximalCost(N) :- N = #max{ C : pathCosts(_,C) }.
:- maximalCost(#inf).
"""


@dataclass(frozen=True)
class AspProgram:
    facts: str
    rules: str
    constants: dict = field(default_factory=dict)

    def text(self) -> str:
        consts = "".join(f"#const {k}={v}.\n" for k, v in sorted(self.constants.items()))
        return consts + self.facts + "\n" + self.rules

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.text())


def emit_rules(objective: Objective, bounds: SolverBounds | None = None, *,
               symmetry: bool = False) -> tuple[str, dict]:
    bounds = objective.bounds if bounds is None else bounds
    v = objective.variant
    uses_cost = v != MIN_PUS or bounds.time_bound is not None
    parts = [_HEADER, _BASE]
    if symmetry:
        parts.append(_SYMMETRY)
    if uses_cost:
        parts.append(_COST)
    consts: dict = {}
    opt = []
    if v == MIN_PUS:
        opt.append("#minimize{ N : amountPUs(N) }.")
    elif v == LEX_PU_TIME:
        opt.append("#minimize{ N@2 : amountPUs(N) }.")
        opt.append("#minimize{ N@1 : maximalCost(N), N > #inf }.")
    elif v == LEX_TIME_PU:
        opt.append("#minimize{ N@2 : maximalCost(N), N > #inf }.")
        opt.append("#minimize{ N@1 : amountPUs(N) }.")
    elif v == MIN_TIME:
        consts["pus_fixed"] = objective.pus
        opt.append(":- amountPUs(N), N != pus_fixed.")
        opt.append("#minimize{ N@1 : maximalCost(N), N > #inf }.")
    if bounds.time_bound is not None:
        consts["max_execution"] = bounds.time_bound
        opt.append(":- maximalCost(N), N > max_execution.")
    if bounds.pu_bound is not None:
        consts["pus_available"] = bounds.pu_bound
        opt.append(":- amountPUs(N), N > pus_available.")
    parts.append("\n".join(opt) + "\n")
    parts.append("#show asgn/2.\n#show order/2.\n#show amountPUs/1.\n")
    if uses_cost:
        parts.append("#show maximalCost/1.\n")
    return "\n".join(parts), consts


def emit_program(bb: BasicBlock, objective: Objective, bounds: SolverBounds | None = None, *,
                 symmetry: bool = False) -> AspProgram:
    """Facts, rules and ``#const`` values for ``objective``.

    ``max_pus`` defaults to the number of variables, the most PUs any
    schedule can keep busy.
    """
    bounds = objective.bounds if bounds is None else bounds
    rules, consts = emit_rules(objective, bounds, symmetry=symmetry)
    consts["max_pus"] = bounds.pu_ceiling(bb)
    if objective.variant == MIN_TIME:
        consts["max_pus"] = max(consts["max_pus"], objective.pus)
    return AspProgram(emit_facts(bb), rules, consts)


def schedule_atoms(bb: BasicBlock, s: Schedule) -> str:
    """The ``asgn``/``order`` atoms an answer set for ``s`` contains."""
    atoms = []
    for p, seq in enumerate(s.sequences):
        for v in seq:
            atoms.append(f"asgn({term(bb.names[v])},{p})")
    for seq in s.sequences:
        for i, a in enumerate(seq):
            for b in seq[i + 1:]:
                atoms.append(f"order({term(bb.names[a])},{term(bb.names[b])})")
    return " ".join(atoms)


_ATOM = re.compile(r'(asgn|order)\(\s*("(?:[^"\\]|\\.)*"|[^,()\s]+)\s*,\s*("(?:[^"\\]|\\.)*"|[^,()\s]+)\s*\)')


def _unquote(tok: str) -> str:
    if tok.startswith('"'):
        return tok[1:-1].replace('\\"', '"')
    return tok


def parse_answer_set(bb: BasicBlock, text: str) -> Schedule:
    asgn: dict[int, int] = {}
    before: dict[int, set[int]] = {}
    for kind, a, b in _ATOM.findall(text):
        a = bb.var(_unquote(a))
        if kind == "asgn":
            p = int(b)
            if asgn.setdefault(a, p) != p:
                raise InconsistentModel(f"{bb.names[a]} is assigned to two PUs")
        else:
            before.setdefault(a, set()).add(bb.var(_unquote(b)))
    missing = [bb.names[v] for v in range(bb.n_vars) if v not in asgn]
    if missing:
        raise MissingAssignment("no PU for " + ", ".join(missing))
    groups: dict[int, list[int]] = {}
    for v, p in asgn.items():
        groups.setdefault(p, []).append(v)
    seqs = []
    for p in sorted(groups):
        members = groups[p]
        # in a strict total order the i-th element precedes exactly n-1-i others
        rank = {}
        for v in members:
            succ = {w for w in before.get(v, ()) if asgn[w] == p}
            if v in succ:
                raise InconsistentModel(f"{bb.names[v]} is ordered before itself")
            rank[v] = len(succ)
        ordered = sorted(members, key=lambda v: -rank[v])
        for i, v in enumerate(ordered):
            later = set(ordered[i + 1:])
            if {w for w in before.get(v, ()) if asgn[w] == p} != later:
                raise InconsistentModel(f"order atoms on PU{p} are not a strict total order")
        seqs.append(ordered)
    return Schedule(seqs)


def find_clingo(path: str | None = None) -> str | None:
    return path if path else shutil.which("clingo")


@dataclass
class ClingoResult:
    models: list[str]
    optimum: list[int] | None
    optimal: bool


def run_clingo(program: AspProgram, exe: str | None = None, *, models: int = 0,
               timeout: float | None = None, extra: tuple[str, ...] = ()) -> ClingoResult:
    """Run an external clingo on ``program``; ``models=0`` asks for all optimal models."""
    exe = find_clingo(exe)
    if exe is None:
        raise FileNotFoundError("clingo executable not found")
    args = [exe, "-", str(models), "--opt-mode=optN", *extra]
    proc = subprocess.run(args, input=program.text(), capture_output=True, text=True, timeout=timeout)
    lines = proc.stdout.splitlines()
    found, opt = [], None
    for i, line in enumerate(lines):
        if line.startswith("Answer:") and i + 1 < len(lines):
            found.append(lines[i + 1])
        elif line.startswith("Optimization:"):
            opt = [int(x) for x in line.split()[1:]]
    # with optN, models printed after the first "OPTIMUM" marker are the optimal ones
    optimal = "OPTIMUM FOUND" in proc.stdout
    return ClingoResult(found, opt, optimal)
