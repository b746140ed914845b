import pytest

from scadsched.blockgen import GenParams, random_block
from scadsched.codegen import MoveInstruction, MoveProgram, DATA, move_program, parse_moves
from scadsched.machine import (
    COMPLETED, DEADLOCK, ONE_PER_CYCLE, PREREGISTERED, Load, MachineConfig, MalformedProgram, Op,
    reference_eval, simulate,
)
from scadsched.model import parse_block
from scadsched.schedule import Schedule, schedule_cost
from scadsched.solver import LEX_PU_TIME, Objective, solve

from conftest import FOUR_PU, MOVES_1


def test_solution_one_runs(bb, sol1):
    res = simulate(bb, move_program(bb, sol1), MachineConfig(2))
    assert res.status == COMPLETED
    assert res.outputs == reference_eval(bb)
    assert res.rounds == 5 == schedule_cost(bb, sol1)


def test_hand_sequence_runs(bb, sol1):
    res = simulate(bb, parse_moves(bb, MOVES_1, sol1), MachineConfig(2))
    assert res.completed and res.outputs == reference_eval(bb)


def test_four_pus_three_rounds(bb):
    s = Schedule.from_names(bb, FOUR_PU)
    res = simulate(bb, move_program(bb, s), MachineConfig(4))
    assert res.completed and res.rounds == 3
    assert res.outputs == reference_eval(bb)


def test_one_per_cycle_small_output_buffers(bb, sol1):
    # pinned by stepping the machine: one registration per round, 15 moves
    res = simulate(bb, move_program(bb, sol1), MachineConfig(2, None, 1, ONE_PER_CYCLE))
    assert (res.status, res.rounds, res.stall_cycles) == (COMPLETED, 17, 0)
    assert res.outputs == reference_eval(bb)


def test_tiny_input_buffers_deadlock(bb, sol1):
    res = simulate(bb, move_program(bb, sol1), MachineConfig(2, 1, 1, PREREGISTERED))
    assert res.status == DEADLOCK
    assert res.outputs != reference_eval(bb)


def test_reference_eval(bb):
    v = bb.var
    ref = reference_eval(bb)
    assert set(ref) == {v("x5"), v("x6"), v("x7"), v("x8")}
    assert ref[v("x7")] == Op(v("x7"), Op(v("x4"), Load(v("x0")), Load(v("x2"))), Load(v("x2")))
    leaf = parse_block("var(a).")
    assert reference_eval(leaf) == {0: Load(0)}


@pytest.mark.parametrize("seed", range(8))
def test_random_blocks_compute_reference(seed):
    block = random_block(GenParams(7 + seed % 4, 3, seed))
    res = solve(block, Objective(LEX_PU_TIME), collect="first")
    s = res.schedules[0]
    run = simulate(block, move_program(block, s), MachineConfig(s.pu_count))
    assert run.completed and run.outputs == reference_eval(block)
    assert run.rounds == res.best_cost


def test_too_few_pus(bb, sol1):
    with pytest.raises(MalformedProgram):
        simulate(bb, move_program(bb, sol1), MachineConfig(1))


def test_missing_moves_deadlock(bb, sol1):
    prog = move_program(bb, sol1)
    res = simulate(bb, MoveProgram(prog.moves[:-2], sol1), MachineConfig(2))
    assert res.status == DEADLOCK


def test_config_validation():
    with pytest.raises(ValueError):
        MachineConfig(2, input_buffer_capacity=0)
    with pytest.raises(ValueError):
        MachineConfig(2, issue_mode="Eager")


def test_trace_and_dict(bb, sol1):
    res = simulate(bb, move_program(bb, sol1), MachineConfig(2, trace=True))
    assert len(res.trace) == res.rounds
    d = res.to_dict(bb)
    assert d["status"] == COMPLETED and d["outputs"]["x7"] == "x7(x4(load(x0), load(x2)), load(x2))"


def test_stores_reach_memory(bb, sol1):
    res = simulate(bb, move_program(bb, sol1, stores=True), MachineConfig(2))
    assert res.completed
    assert res.stored == reference_eval(bb)


def test_wrong_source_is_rejected(bb, sol1):
    prog = move_program(bb, sol1)
    bogus = (MoveInstruction(DATA, bb.var("x8"), 0, "L"),) + prog.moves
    res_or_err = None
    try:
        res_or_err = simulate(bb, MoveProgram(bogus, sol1), MachineConfig(2))
    except MalformedProgram:
        return
    assert res_or_err.status == DEADLOCK or res_or_err.outputs != reference_eval(bb)
