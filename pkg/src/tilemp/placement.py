"""Static allocation: compact data clusters, rooted cores and scratchpads."""
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._accel import INF
from .floorplan import FloorplanGraph


class PlacementError(Exception):
    """Raised when data tiles or routing ancilla cannot satisfy a demand."""


@dataclass
class ResidentAllocation:
    workload: int
    D: frozenset
    A: frozenset = frozenset()
    port: object = None           # port tile id or None in port-free / cultivation modes
    edges: frozenset = frozenset()
    P: frozenset = frozenset()
    root: int = -1
    order: tuple = ()             # data tiles in growth order (seed first)

    @property
    def tiles(self):
        v = set(self.D) | set(self.A)
        if self.port is not None:
            v.add(self.port)
        return v


@dataclass
class OpCounter:
    """Instrumentation for complexity checks."""
    argmin_scans: int = 0
    bfs_calls: int = 0
    extra: dict = field(default_factory=dict)


def _mask(n, tiles):
    if isinstance(tiles, np.ndarray) and tiles.dtype == np.bool_:
        return tiles.copy()
    m = np.zeros(n, dtype=np.bool_)
    if tiles:
        m[np.fromiter(tiles, dtype=np.int64)] = True
    return m


def _seed_for(g, anchor, avail):
    # anchor: None (lowest free id), a tile id, or a per-tile distance vector
    if anchor is None:
        idx = np.flatnonzero(avail)
        return int(idx[0]) if idx.size else -1
    dvec = anchor if isinstance(anchor, np.ndarray) else g.dist_row(anchor)
    return int(_accel.nearest_avail(dvec, avail))


def compact_partition(g: FloorplanGraph, demands, free_data, counter: OpCounter = None):
    """Greedy compact partitioning restricted to ``free_data``.

    ``demands`` is a list of ``(wid, q, anchor)``; the seed of each cluster is
    the free data tile nearest ``anchor`` (a port, or any tile; ``None`` picks
    the lowest free id).  Clusters then grow round-robin, one tile per
    unfinished cluster per sweep, each time taking the free data tile closest
    to the partial cluster.  Ties go to the lowest tile id.

    Returns one list per demand with tiles in insertion order.  Raises
    :class:`PlacementError` when the free data run out.
    """
    avail = _mask(g.n, free_data) & g.is_data
    total = sum(q for _, q, _ in demands)
    if total > int(avail.sum()):
        raise PlacementError(f"need {total} data tiles, only {int(avail.sum())} free")
    clusters = [[] for _ in demands]
    mind = [None] * len(demands)
    for i, (_, q, anchor) in enumerate(demands):
        if q <= 0:
            continue
        if counter is not None:
            counter.argmin_scans += 1
        s = _seed_for(g, anchor, avail)
        clusters[i].append(s)
        avail[s] = False
        mind[i] = np.array(g.dist_row(s), dtype=np.int32)
    active = [i for i, (_, q, _) in enumerate(demands) if q > 1]
    while active:
        still = []
        for i in active:
            if counter is not None:
                counter.argmin_scans += 1
            masked = np.where(avail, mind[i], INF)
            v = int(np.argmin(masked))
            # total was checked up-front, so a free tile always exists here
            clusters[i].append(v)
            avail[v] = False
            np.minimum(mind[i], g.dist_row(v), out=mind[i])
            if len(clusters[i]) < demands[i][1]:
                still.append(i)
        active = still
    return clusters


def grow_single(g: FloorplanGraph, q, free_data, anchor=None):
    """Single-cluster compact growth via the accelerated kernel (dense graphs)."""
    avail = _mask(g.n, free_data) & g.is_data
    if q <= 0:
        return []
    if q > int(avail.sum()):
        raise PlacementError(f"need {q} data tiles, only {int(avail.sum())} free")
    if g.dist is None:
        return compact_partition(g, [(0, q, anchor)], free_data)[0]
    s = _seed_for(g, anchor, avail)
    return [int(v) for v in _accel.grow_cluster(g.dist, avail, s, q)]


def _trace_path(g, h, hops, cost, allowed, target, ahead=None, later=None):
    # Walk back from target along tight edges.  Among tight predecessors take
    # the one closest to the terminals still waiting (``ahead``), then the one
    # with the smallest total hop distance to all of them, then the smallest
    # id, so equal-cost attachments lean towards shared junctions.
    path = [target]
    v = target
    while hops[v] > 0:
        tight = [u for u in g.neighbors(v)
                 if allowed[u] and hops[u] == hops[v] - 1 and h[v] == h[u] + cost[v]]
        if not tight:  # pragma: no cover - tight-hop labels guarantee a predecessor
            raise RuntimeError("broken predecessor chain")
        if ahead is None or len(tight) == 1:
            v = min(tight)
        else:
            spread = g.dist[np.ix_(tight, later)].sum(axis=1) if g.dist is not None else np.zeros(len(tight))
            v = min(zip(tight, spread.tolist()), key=lambda p: (ahead[p[0]], p[1], p[0]))[0]
        path.append(v)
    path.reverse()
    return path


def _prune(g, A, terminals):
    # Drop ancilla the tree can do without, newest first.
    keep = set(A)
    for a in sorted(A, reverse=True):
        if is_connected(g, (keep - {a}) | terminals):
            keep.discard(a)
    return keep


def _spanning_edges(g, nodes, root):
    seen = {root}
    order = [root]
    edges = set()
    for v in order:
        for u in sorted(g.neighbors(v)):
            if u in nodes and u not in seen:
                seen.add(u)
                order.append(u)
                edges.add((min(u, v), max(u, v)))
    return edges


def build_core(g: FloorplanGraph, D, root, free_ancilla, counter: OpCounter = None):
    """Incremental rooted core construction.

    Starting from ``{root}``, repeatedly attaches the unconnected data tile
    that is cheapest to reach, where entering a free ancilla tile costs 1 and
    entering the core or one of the workload's own data tiles costs 0.  Among
    minimum-cost paths the one with fewest hops is used.  Returns
    ``(A, edges)``; ``free_ancilla`` is not modified.
    """
    D = set(int(v) for v in D)
    root = int(root)
    pool = set(int(a) for a in free_ancilla) - D
    remaining = D - {root}
    core = {root}
    A = set()
    edges = set()
    if not remaining:
        return frozenset(), frozenset()
    n = g.n
    dmask = _mask(n, D)
    while remaining:
        cost = np.ones(n, dtype=np.int8)
        cost[dmask] = 0
        cmask = _mask(n, core)
        cost[cmask] = 0
        allowed = _mask(n, pool) | dmask | cmask
        h = _accel.zero_one_bfs(g.indptr, g.indices, cost, allowed, cmask)
        if counter is not None:
            counter.bfs_calls += 1
        rem = np.fromiter(sorted(remaining), dtype=np.int64)
        hr = h[rem]
        k = int(np.argmin(hr))
        if hr[k] >= INF:
            raise PlacementError(f"data tile {int(rem[k])} unreachable through free ancilla")
        # Zero-cost terminals only pass through data and core tiles, so
        # attaching them together yields the same core as one at a time.
        targets = rem[hr == 0].tolist() if hr[k] == 0 else [int(rem[k])]
        hops = _accel.tight_hops(g.indptr, g.indices, cost, allowed, cmask, h)
        ahead = None
        later = sorted(remaining - set(targets))
        if later and hr[k] > 0:
            ahead = _accel.zero_one_bfs(g.indptr, g.indices, cost, allowed, _mask(n, later))
        for target in targets:
            path = _trace_path(g, h, hops, cost, allowed, target, ahead, later)
            for a, b in zip(path, path[1:]):
                edges.add((min(a, b), max(a, b)))
            for v in path:
                if v in pool:
                    A.add(v)
                    pool.discard(v)
                core.add(v)
                remaining.discard(v)
    terminals = D | {root}
    slim = _prune(g, A, terminals)
    if slim != A:
        A = slim
        edges = _spanning_edges(g, A | terminals, root)
    return frozenset(A), frozenset(edges)


def scratchpad_of(g: FloorplanGraph, tiles, pool):
    """Tiles of ``pool`` at distance exactly 1 from ``tiles``."""
    out = set()
    for v in tiles:
        for u in g.neighbors(v):
            if u in pool and u not in tiles:
                out.add(u)
    return out


def derive_scratchpads(g: FloorplanGraph, allocations, free_ancilla):
    """Primary scratchpad per allocation and the shared secondary pool."""
    cores = set()
    for al in allocations:
        cores |= set(al.A)
    S = set(int(a) for a in free_ancilla) - cores
    P = {al.workload: frozenset(scratchpad_of(g, al.tiles, S)) for al in allocations}
    return P, frozenset(S)


def static_allocate(g: FloorplanGraph, workloads, port_assignment=None, free_data=None, free_ancilla=None):
    """Place every workload: compact clusters, then cores in input order, then scratchpads.

    ``workloads`` is a list of ``(wid, q)`` pairs (or objects with ``id`` and
    ``qubits``).  ``port_assignment`` maps wid to a port tile; a workload
    without a port is rooted at its cluster seed.
    """
    port_assignment = port_assignment or {}
    pairs = [(w.id, w.qubits) if hasattr(w, "qubits") else (int(w[0]), int(w[1])) for w in workloads]
    ports = [port_assignment.get(wid) for wid, _ in pairs]
    used = [p for p in ports if p is not None]
    if len(set(used)) != len(used):
        raise PlacementError("ports must be distinct")
    for p in used:
        if not g.is_port[p]:
            raise PlacementError(f"tile {p} is not a magic-state port")
    if free_data is None:
        free_data = set(g.data.tolist())
    if free_ancilla is None:
        free_ancilla = set(g.ancilla.tolist())
    demands = [(wid, q, port) for (wid, q), port in zip(pairs, ports)]
    clusters = compact_partition(g, demands, free_data)
    pool = set(free_ancilla)
    allocs = []
    for (wid, q), port, cl in zip(pairs, ports, clusters):
        if not cl:
            allocs.append(ResidentAllocation(wid, frozenset(), port=port, order=()))
            continue
        root = port if port is not None else cl[0]
        A, E = build_core(g, cl, root, pool)
        pool -= A
        allocs.append(ResidentAllocation(wid, frozenset(cl), A, port, E, root=root, order=tuple(cl)))
    P, _ = derive_scratchpads(g, allocs, free_ancilla)
    for al in allocs:
        al.P = P[al.workload]
    return allocs


def is_connected(g: FloorplanGraph, tiles):
    tiles = set(tiles)
    if not tiles:
        return True
    start = next(iter(tiles))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in g.neighbors(v):
            if u in tiles and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(tiles)
