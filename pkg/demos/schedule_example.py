"""Walk through the nine-variable example block.

Finds the fewest PUs, the fastest schedules, and how many schedules tie for
each optimum, then checks one of them on the machine model.
"""

from scadsched import Objective, SolverBounds, parse_block, schedule_cost, solve, validate
from scadsched.codegen import move_program
from scadsched.machine import MachineConfig, reference_eval, simulate
from scadsched.model import depth

BLOCK = """\
operand(x3, x0, x1).
operand(x4, x0, x2).
operand(x5, x0, x3).
operand(x6, x1, x3).
operand(x7, x4, x2).
operand(x8, x4, x2).
"""

bb = parse_block(BLOCK)
print(f"{bb.n_vars} variables, critical path {depth(bb)}")

objectives = [
    ("fewest PUs", Objective("min-pus")),
    ("fewest PUs, then time", Objective("lex-pu-time")),
    ("fastest, then fewest PUs", Objective("lex-time-pu")),
    ("fewest PUs within 4 steps", Objective("min-pus", bounds=SolverBounds(time_bound=4))),
]
for label, obj in objectives:
    r = solve(bb, obj)
    print(f"{label:28s} pus={r.best_pus} cost={r.best_cost} "
          f"schedules={r.count_total} (up to PU renaming: {r.count_canonical})")

# take one optimal two-PU schedule and run it
best = solve(bb, Objective("lex-pu-time"), collect="first").schedules[0]
print()
print(best.format(bb))
assert validate(bb, best).valid

prog = move_program(bb, best)
print(f"\n{len(prog.moves)} moves:")
print(prog.format(bb))

res = simulate(bb, prog, MachineConfig(pu_count=best.pu_count))
print(f"{res.status} after {res.rounds} rounds (cost {schedule_cost(bb, best)}); "
      f"outputs correct: {res.outputs == reference_eval(bb)}")
