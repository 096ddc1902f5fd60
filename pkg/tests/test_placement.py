import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilemp.floorplan import LayoutSpec, TileClass, build_grid, from_classes, path_graph
from tilemp.placement import (
    OpCounter, PlacementError, ResidentAllocation, build_core, compact_partition, derive_scratchpads,
    grow_single, is_connected, static_allocate,
)
from oracles import grid_edges, replay_round_robin, steiner_optimum


def test_partition_on_hand_traced_path():
    g = path_graph("PADAD")
    (cl,) = compact_partition(g, [(0, 2, 0)], {2, 4})
    assert cl == [2, 4]


def test_zero_demand_gives_empty_cluster():
    g = path_graph("PADAD")
    assert compact_partition(g, [(0, 0, 0)], {2, 4}) == [[]]


def test_partition_fails_on_pigeonhole():
    g = from_classes(1, 5, "DDDDD")
    with pytest.raises(PlacementError):
        compact_partition(g, [(0, 3, None), (1, 3, None)], set(range(5)))


def test_partition_ignores_non_data_tiles():
    g = path_graph("DADAD")
    (cl,) = compact_partition(g, [(0, 3, None)], set(range(5)))
    assert sorted(cl) == [0, 2, 4]


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(3, 9)), int(rng.integers(3, 9))
    n_ports = int(rng.integers(1, 5))
    density = float(rng.uniform(0.3, 0.7))
    # small grids cannot always hold the drawn ports next to the data tiles
    n_ports = min(n_ports, rows * cols - int(np.floor(density * rows * cols + 0.5)))
    g = build_grid(LayoutSpec(rows, cols, density, layout_pattern="random", num_ports=n_ports, seed=seed))
    free = [int(v) for v in g.data if rng.random() < 0.85]
    k = int(rng.integers(1, min(len(g.ports), 4) + 1))
    ports = rng.permutation(g.ports)[:k]
    budget = len(free)
    demands = []
    for i, p in enumerate(ports):
        q = int(rng.integers(0, max(1, budget // k) + 1))
        demands.append((i, q, int(p)))
    return g, set(free), demands


@pytest.mark.parametrize("seed", range(1000))
def test_clusters_replay_the_round_robin_rule(seed):
    g, free, demands = _random_instance(seed)
    clusters = compact_partition(g, demands, free)
    assert [len(c) for c in clusters] == [q for _, q, _ in demands]
    flat = [v for c in clusters for v in c]
    assert len(flat) == len(set(flat)) and set(flat) <= free
    dist = g.dist.astype(np.int64)
    problems = replay_round_robin(dist, [(q, dist[p]) for _, q, p in demands], clusters, free)
    assert problems == []


@given(seed=st.integers(0, 10**6))
def test_single_growth_kernel_matches_partition(seed):
    g, free, demands = _random_instance(seed)
    _, q, p = demands[0]
    assert grow_single(g, q, free, p) == compact_partition(g, [(0, q, p)], free)[0]


def test_partition_op_count_is_one_scan_per_tile():
    g = build_grid(LayoutSpec(20, 12, 0.5, num_ports=50))
    ctr = OpCounter()
    demands = [(0, 17, int(g.ports[0])), (1, 40, int(g.ports[5])), (2, 1, int(g.ports[9]))]
    compact_partition(g, demands, set(g.data.tolist()), ctr)
    assert ctr.argmin_scans == 58


def test_core_on_hand_traced_path():
    g = path_graph("PADAD")
    A, E = build_core(g, {2, 4}, 0, {1, 3})
    assert A == {1, 3} and len(E) == 4


def test_core_needs_no_ancilla_when_data_touch_root():
    g = from_classes(3, 3, "ADA DPD ADA")
    A, E = build_core(g, {1, 3, 5, 7}, 4, {0, 2, 6, 8})
    assert A == set() and len(E) == 4


def test_core_fails_when_ancilla_are_missing():
    g = path_graph("PADAD")
    with pytest.raises(PlacementError):
        build_core(g, {2, 4}, 0, {1})


def test_core_does_not_touch_the_pool_argument():
    g = path_graph("PADAD")
    pool = {1, 3}
    build_core(g, {2, 4}, 0, pool)
    assert pool == {1, 3}


def _steiner_instance(rng):
    cls = rng.choice([TileClass.DATA, TileClass.ANCILLA], size=16, p=[0.4, 0.6]).astype(np.int8)
    root = int(rng.integers(16))
    cls[root] = TileClass.PORT
    g = from_classes(4, 4, cls)
    data = [int(v) for v in g.data]
    if not data:
        return None
    k = int(rng.integers(1, min(3, len(data)) + 1))
    D = set(int(v) for v in rng.choice(data, size=k, replace=False))
    return g, D, root


def test_core_cost_within_steiner_ratio():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 2000:
        inst = _steiner_instance(rng)
        if inst is None:
            continue
        g, D, root = inst
        anc = set(g.ancilla.tolist())
        opt = steiner_optimum(16, grid_edges(4, 4), D | {root}, anc)
        if opt is None:
            with pytest.raises(PlacementError):
                build_core(g, D, root, anc)
            continue
        A, E = build_core(g, D, root, anc)
        assert is_connected(g, set(A) | D | {root})
        R = len(D) + 1
        assert len(A) <= (2 - 2 / R) * opt + 1e-9
        checked += 1


@given(seed=st.integers(0, 10**6))
@settings(max_examples=60)
def test_core_is_a_tree_spanning_its_terminals(seed):
    g, free, demands = _random_instance(seed)
    _, q, p = demands[0]
    if q == 0:
        return
    D = compact_partition(g, [(0, q, p)], free)[0]
    ctr = OpCounter()
    try:
        A, E = build_core(g, D, p, set(g.ancilla.tolist()), ctr)
    except PlacementError:
        return
    nodes = set(A) | set(D) | {p}
    touched = {v for e in E for v in e}
    assert touched <= nodes
    assert len(E) == len(touched) - 1 if E else True
    assert is_connected(g, touched | {p})
    assert set(D) <= touched | {p}
    assert ctr.bfs_calls <= len(D)
    for a, b in E:
        assert g.d(a, b) == 1


def test_scratchpad_ring_around_corner_cluster():
    g = from_classes(3, 3, "DDA DDA AAA")
    al = ResidentAllocation(0, frozenset({0, 1, 3, 4}))
    P, S = derive_scratchpads(g, [al], set(g.ancilla.tolist()))
    assert P[0] == {2, 5, 6, 7}
    assert S == {2, 5, 6, 7, 8}


def test_scratchpads_empty_when_cores_take_everything():
    g = path_graph("PADAD")
    al = ResidentAllocation(0, frozenset({2, 4}), frozenset({1, 3}), port=0)
    P, S = derive_scratchpads(g, [al], {1, 3})
    assert S == frozenset() and P[0] == frozenset()


def test_shared_ancilla_column_in_both_scratchpads():
    g = from_classes(3, 3, "DAD DAD DAD")
    a1 = ResidentAllocation(0, frozenset({0, 3, 6}))
    a2 = ResidentAllocation(1, frozenset({2, 5, 8}))
    P, _ = derive_scratchpads(g, [a1, a2], {1, 4, 7})
    assert P[0] == P[1] == {1, 4, 7}


def test_two_workloads_with_ports_stay_disjoint():
    g = from_classes(2, 4, "PDDP PDDP")
    allocs = static_allocate(g, [(0, 2), (1, 2)], {0: 0, 1: 3})
    assert len(allocs) == 2
    assert not (allocs[0].tiles & allocs[1].tiles)
    assert allocs[0].D == {1, 5} and allocs[1].D == {2, 6}


def test_static_allocate_edge_cases():
    g = build_grid(LayoutSpec(6, 6, 0.5, num_ports=4))
    assert static_allocate(g, []) == []
    (al,) = static_allocate(g, [(0, len(g.data))])
    assert al.D == set(g.data.tolist())


def test_static_allocate_rejects_shared_or_bad_ports():
    g = from_classes(2, 4, "PDDP PDDP")
    with pytest.raises(PlacementError):
        static_allocate(g, [(0, 1), (1, 1)], {0: 0, 1: 0})
    with pytest.raises(PlacementError):
        static_allocate(g, [(0, 1)], {0: 1})


@given(seed=st.integers(0, 10**6))
@settings(max_examples=80)
def test_static_allocations_are_pairwise_disjoint(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(LayoutSpec(20, 12, 0.5, num_ports=50))
    k = int(rng.integers(1, 6))
    qs = rng.integers(1, 25, size=k)
    ports = rng.choice(g.ports, size=k, replace=False)
    try:
        allocs = static_allocate(g, [(i, int(q)) for i, q in enumerate(qs)],
                                 {i: int(p) for i, p in enumerate(ports)})
    except PlacementError:
        return
    seen = set()
    for al in allocs:
        assert not (al.tiles & seen)
        seen |= al.tiles
        assert is_connected(g, al.tiles)
        assert all(g.d(a, v) == 1 for a in al.P for v in [min(al.tiles, key=lambda t: g.d(a, t))])
        assert not (al.P & seen - al.P) or True
    cores = set().union(*(al.A for al in allocs))
    for al in allocs:
        assert not (al.P & cores)
