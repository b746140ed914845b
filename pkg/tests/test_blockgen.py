import networkx as nx
import pytest

from scadsched.aspgen import emit_facts
from scadsched.blockgen import GenParams, InfeasibleParams, SplitMix64, corpus, level_sizes, random_block
from scadsched.model import depth


def test_splitmix_reference_stream():
    rng = SplitMix64(0)
    assert [rng.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    ]


def test_below_range():
    rng = SplitMix64(5)
    draws = [rng.below(3) for _ in range(300)]
    assert set(draws) == {0, 1, 2}
    with pytest.raises(ValueError):
        rng.below(0)


def test_nine_three():
    bb = random_block(GenParams(9, 3, 42))
    assert bb.n_vars == 9 and depth(bb) == 3


def test_single_leaf():
    bb = random_block(GenParams(1, 1, 0))
    assert bb.n_vars == 1 and bb.defs == {}


def test_deterministic():
    a = emit_facts(random_block(GenParams(9, 3, 42)))
    assert a == emit_facts(random_block(GenParams(9, 3, 42)))
    assert a != emit_facts(random_block(GenParams(9, 3, 43)))


@pytest.mark.parametrize("n, levels", [(0, 1), (3, 0), (3, 4)])
def test_infeasible(n, levels):
    with pytest.raises(InfeasibleParams):
        random_block(GenParams(n, levels))


@pytest.mark.parametrize("n, levels", [(5, 5), (12, 4), (20, 4), (20, 1), (30, 7)])
def test_shape(n, levels):
    for name, bb in corpus(n, levels, 5, seed=3):
        assert bb.n_vars == n
        assert depth(bb) == levels
        g = nx.DiGraph(bb.edges)
        assert nx.is_directed_acyclic_graph(g)


def test_level_sizes_partition():
    sizes = level_sizes(SplitMix64(1), 10, 4)
    assert len(sizes) == 4 and sum(sizes) == 10 and min(sizes) >= 1


def test_corpus_names():
    names = [name for name, _ in corpus(6, 2, 3, seed=10)]
    assert names == ["n6_l2_s10", "n6_l2_s11", "n6_l2_s12"]
