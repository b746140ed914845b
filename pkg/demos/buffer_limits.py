"""How buffer capacity and move issue affect one schedule's execution.

With every move registered up front and unbounded FIFOs the schedule runs in
as many rounds as its cost.  Issuing one move per cycle into tiny buffers can
stall or deadlock it.
"""

from scadsched import Schedule, parse_block
from scadsched.codegen import move_program
from scadsched.machine import MachineConfig, ONE_PER_CYCLE, PREREGISTERED, simulate

bb = parse_block("""
operand(x3, x0, x1).
operand(x4, x0, x2).
operand(x5, x0, x3).
operand(x6, x1, x3).
operand(x7, x4, x2).
operand(x8, x4, x2).
""")
s = Schedule.from_names(bb, [["x0", "x1", "x4", "x5", "x6"], ["x2", "x3", "x7", "x8"]])
prog = move_program(bb, s)

for mode in (PREREGISTERED, ONE_PER_CYCLE):
    for cap in (None, 4, 2, 1):
        cfg = MachineConfig(pu_count=2, input_buffer_capacity=cap,
                            output_buffer_capacity=cap, issue_mode=mode)
        r = simulate(bb, prog, cfg)
        print(f"{mode:14s} capacity={str(cap):4s} {r.status:9s} "
              f"rounds={r.rounds:3d} stalls={r.stall_cycles}")
