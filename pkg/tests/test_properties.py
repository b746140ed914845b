import itertools

from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from scadsched import aspgen, codegen, machine, oracle, solver
from scadsched.layered import LayerCounter
from scadsched.model import depth, parse_block
from scadsched.schedule import Schedule, canonical_form, is_canonical, schedule_cost, validate

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def blocks(draw, max_n=6):
    """Random blocks: every operation reads two earlier variables."""
    leaves = draw(st.integers(1, 3))
    ops = draw(st.integers(1, max_n - leaves))
    lines = []
    for x in range(leaves, leaves + ops):
        a = draw(st.integers(0, x - 1))
        b = draw(st.integers(0, x - 1))
        lines.append(f"operand(v{x}, v{a}, v{b}).")
    text = "\n".join(lines) + "\n"
    # leaves nobody reads would not appear in any fact
    used = {f"v{i}" for i in range(leaves + ops) if f"v{i}," in text or f"v{i})" in text}
    extra = "".join(f"var(v{i}).\n" for i in range(leaves) if f"v{i}" not in used)
    return parse_block(extra + text)


def as_set(schedules):
    return {tuple(map(tuple, s.sequences)) for s in schedules}


@SETTINGS
@given(blocks(), st.integers(1, 3))
def test_enumeration_matches_brute_force(bb, k):
    assume(k <= bb.n_vars)
    assert as_set(solver.enumerate_valid(bb, k)) == as_set(oracle.brute_force_schedules(bb, k))


@SETTINGS
@given(blocks(), st.integers(1, 3))
def test_acyclic_enumeration_matches_brute_force(bb, k):
    assume(k <= bb.n_vars)
    got = as_set(solver.enumerate_valid(bb, k, acyclic=True))
    assert got == as_set(oracle.brute_force_schedules(bb, k, acyclic=True))


@SETTINGS
@given(blocks(), st.integers(1, 3), st.integers(1, 6))
def test_layered_count_matches_filtered_enumeration(bb, k, c):
    assume(k <= bb.n_vars)
    want = sum(1 for s in solver.enumerate_valid(bb, k, acyclic=True) if schedule_cost(bb, s) <= c)
    assert LayerCounter(bb, k).count(c) == want
    assert LayerCounter(bb, k).count(c, compiled=False) == want
    assert LayerCounter(bb, k).exists(c) == (want > 0)


@SETTINGS
@given(blocks(), st.integers(1, 3), st.data())
def test_canonical_form_is_permutation_invariant(bb, k, data):
    assume(k <= bb.n_vars)
    found = solver.enumerate_valid(bb, k)
    assume(found)
    s = data.draw(st.sampled_from(found))
    perm = data.draw(st.permutations(range(k)))
    shuffled = Schedule([s.sequences[p] for p in perm])
    c = canonical_form(s)
    assert canonical_form(shuffled) == c
    assert canonical_form(c) == c
    assert is_canonical(c)
    assert validate(bb, shuffled).valid == validate(bb, s).valid
    assert schedule_cost(bb, shuffled) == schedule_cost(bb, s)


@SETTINGS
@given(blocks(), st.integers(1, 3))
def test_canonical_count_times_factorial(bb, k):
    assume(k <= bb.n_vars)
    every = solver.enumerate_valid(bb, k)
    canon = solver.enumerate_valid(bb, k, canonical_only=True)
    assert len(every) == len(canon) * len(list(itertools.permutations(range(k))))
    assert all(is_canonical(s) for s in canon)


@SETTINGS
@given(blocks(max_n=7))
def test_cost_never_below_depth(bb):
    for k in (1, 2):
        for s in solver.enumerate_valid(bb, k, acyclic=True):
            assert schedule_cost(bb, s) >= depth(bb)


@SETTINGS
@given(blocks(), st.integers(1, 3), st.data())
def test_simulation_outputs_are_reference_terms(bb, k, data):
    assume(k <= bb.n_vars)
    found = solver.enumerate_valid(bb, k, acyclic=True)
    assume(found)
    s = data.draw(st.sampled_from(found))
    try:
        prog = codegen.move_program(bb, s, check=False)
    except codegen.CyclicPrecedence:
        return
    res = machine.simulate(bb, prog, machine.MachineConfig(pu_count=s.pu_count))
    if res.completed:
        assert res.outputs == machine.reference_eval(bb)
        assert res.rounds >= depth(bb)


@SETTINGS
@given(blocks(max_n=8))
def test_facts_roundtrip(bb):
    again = parse_block(aspgen.emit_facts(bb))
    assert again == bb
    assert again.names == bb.names


@SETTINGS
@given(blocks(), st.integers(1, 3), st.data())
def test_answer_set_roundtrip(bb, k, data):
    assume(k <= bb.n_vars)
    found = solver.enumerate_valid(bb, k)
    assume(found)
    s = data.draw(st.sampled_from(found))
    assert aspgen.parse_answer_set(bb, aspgen.schedule_atoms(bb, s)) == s
