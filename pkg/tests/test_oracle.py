import pytest

from scadsched.model import parse_block
from scadsched.oracle import TooLarge, brute_force_schedules, constraints_hold, executable_check
from scadsched.schedule import Schedule


def test_one_op_two_pus():
    bb = parse_block("operand(c,a,b).")
    got = {tuple(tuple(bb.names[v] for v in seq) for seq in s.sequences)
           for s in brute_force_schedules(bb, 2)}
    # counted by hand: {a,b} on one PU in either order, or c after its co-located operand
    expected = {
        (("a", "b"), ("c",)), (("b", "a"), ("c",)), (("c",), ("a", "b")), (("c",), ("b", "a")),
        (("a", "c"), ("b",)), (("b",), ("a", "c")), (("b", "c"), ("a",)), (("a",), ("b", "c")),
    }
    assert got == expected


def test_one_op_one_pu():
    bb = parse_block("operand(c,a,b).")
    got = {s.sequences for s in brute_force_schedules(bb, 1)}
    a, b, c = (bb.var(x) for x in "abc")
    assert got == {((a, b, c),), ((b, a, c),)}


def test_more_pus_than_vars():
    bb = parse_block("operand(c,a,b).")
    assert brute_force_schedules(bb, 4) == []


def test_size_guard(bb):
    with pytest.raises(TooLarge):
        brute_force_schedules(bb, 5)


@pytest.mark.slow
def test_example_two_pus(bb):
    assert len(brute_force_schedules(bb, 2)) == 8800


def test_constraints_hold(bb, sol1):
    assert constraints_hold(bb, sol1.sequences)
    assert not constraints_hold(bb, sol1.sequences[:1])
    inverted = Schedule.from_names(bb, [["x5", "x0", "x1", "x4", "x6"], ["x2", "x3", "x7", "x8"]])
    assert not constraints_hold(bb, inverted.sequences)


def test_executable_check(bb, sol1):
    assert executable_check(bb, sol1)
    inverted = Schedule.from_names(bb, [["x5", "x0", "x1", "x4", "x6"], ["x2", "x3", "x7", "x8"]])
    assert not executable_check(bb, inverted)
