from sinklimit.scc import sink_components, strongly_connected_components
from sinklimit.unionfind import UnionFind


def test_tarjan_partitions_known_graph():
    adj = {0: [1], 1: [2], 2: [0], 3: [1, 2, 4], 4: [5, 3], 5: [6, 1], 6: [5], 7: [6, 7, 4]}
    comps = strongly_connected_components(range(8), lambda v: adj[v])
    as_sets = {frozenset(c) for c in comps}
    assert as_sets == {frozenset({0, 1, 2}), frozenset({3, 4}), frozenset({5, 6}), frozenset({7})}


def test_tarjan_deep_chain_is_iterative():
    n = 50_000
    comps = strongly_connected_components(range(n), lambda v: [v + 1] if v + 1 < n else [])
    assert len(comps) == n


def test_sink_components_ordering_and_members():
    adj = {0: [1], 1: [0, 2], 2: [3], 3: [2], 4: [], 5: [4]}
    sinks = sink_components(range(6), lambda v: adj[v])
    assert sinks == [[2, 3], [4]]


def test_union_find_controlled_roots():
    uf = UnionFind(6)
    uf.union_into(0, 3)
    uf.union_into(0, 5)
    assert uf.find(3) == uf.find(5) == uf.find(0) == 0
    uf.union_into(2, 0)
    assert {uf.find(i) for i in (0, 2, 3, 5)} == {2}
    assert uf.find(1) == 1


def test_union_find_copy_is_independent():
    uf = UnionFind(4)
    dup = uf.copy()
    uf.union_into(0, 1)
    assert uf.find(1) == 0
    assert dup.find(1) == 1
