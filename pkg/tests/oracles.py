"""Independent reference implementations used only by the tests.

Nothing here imports the package's own algorithms; each oracle is the
slow, obvious way of computing the same quantity.
"""
from itertools import combinations

import numpy as np


def grid_edges(rows, cols):
    out = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                out.append((v, v + 1))
            if r + 1 < rows:
                out.append((v, v + cols))
    return out


def floyd_warshall(n, edges):
    inf = 10**9
    d = np.full((n, n), inf, dtype=np.int64)
    np.fill_diagonal(d, 0)
    for u, v in edges:
        d[u, v] = d[v, u] = 1
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def uf_components(n, edges, keep):
    """Components of the subgraph induced by ``keep`` (a set of vertices)."""
    uf = UnionFind(n)
    for u, v in edges:
        if u in keep and v in keep:
            uf.union(u, v)
    groups = {}
    for v in sorted(keep):
        groups.setdefault(uf.find(v), set()).add(v)
    return list(groups.values())


def connected(tiles, edges):
    tiles = set(tiles)
    if not tiles:
        return True
    return len(uf_components(max(tiles) + 1, edges, tiles)) == 1


def steiner_optimum(n, edges, terminals, ancilla):
    """Fewest ancilla tiles that connect every terminal (exhaustive search)."""
    terminals = set(terminals)
    ancilla = sorted(ancilla)
    for k in range(len(ancilla) + 1):
        for extra in combinations(ancilla, k):
            if connected(terminals | set(extra), edges):
                return k
    return None


def replay_round_robin(dist, demands, clusters, free):
    """Check clusters against the compact-growth rule by replaying the round-robin.

    ``demands`` is ``[(q, anchor_distance_vector or None)]``; ``clusters``
    holds each cluster's tiles in insertion order.  Seeds must be a free data
    tile nearest the anchor (lowest free id when there is none); every later
    tile must be at minimum distance from its partial cluster among the tiles
    still free at that moment.  Returns a list of problems.
    """
    free = set(free)
    problems = []
    pos = [0] * len(clusters)
    for i, (q, anchor) in enumerate(demands):
        if q == 0:
            continue
        s = clusters[i][0]
        if s not in free:
            problems.append(f"cluster {i} seed {s} not free")
            continue
        if anchor is None:
            ok = s == min(free)
        else:
            ok = anchor[s] == min(anchor[u] for u in free)
        if not ok:
            problems.append(f"cluster {i} seed {s} is not nearest the anchor")
        free.discard(s)
        pos[i] = 1
    active = [i for i, (q, _) in enumerate(demands) if q > 1]
    while active:
        nxt = []
        for i in active:
            v = clusters[i][pos[i]]
            part = clusters[i][:pos[i]]
            if v not in free:
                problems.append(f"cluster {i} took non-free tile {v}")
            else:
                best = min(min(dist[u][c] for c in part) for u in free)
                if min(dist[v][c] for c in part) != best:
                    problems.append(f"cluster {i} tile {v} is not a nearest free tile")
            free.discard(v)
            pos[i] += 1
            if pos[i] < demands[i][0]:
                nxt.append(i)
        active = nxt
    return problems


class BitGrid:
    """Grid connectivity on bitmasks, fast enough for exhaustive enumeration."""

    def __init__(self, rows, cols):
        self.rows, self.cols, self.n = rows, cols, rows * cols
        self.full = (1 << self.n) - 1
        not_first = not_last = 0
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c > 0:
                    not_first |= 1 << v
                if c < cols - 1:
                    not_last |= 1 << v
        self.not_first, self.not_last = not_first, not_last

    def spread(self, m):
        c = self.cols
        return (m | ((m & self.not_last) << 1) | ((m & self.not_first) >> 1) | (m << c) | (m >> c)) & self.full

    def connected(self, mask):
        if mask == 0:
            return True
        reach = mask & -mask
        while True:
            nxt = self.spread(reach) & mask
            if nxt == reach:
                return reach == mask
            reach = nxt


def steiner_optimum_bits(bg, terminals, ancilla):
    """Exhaustive minimum number of ancilla joining ``terminals`` (None if impossible)."""
    term = 0
    for v in terminals:
        term |= 1 << v
    anc = sorted(ancilla)
    allmask = term
    for a in anc:
        allmask |= 1 << a
    # terminals must share one component of terminals + every ancilla
    reach = term & -term
    while True:
        nxt = bg.spread(reach) & allmask
        if nxt == reach:
            break
        reach = nxt
    if reach & term != term:
        return None
    for k in range(len(anc) + 1):
        for extra in combinations(anc, k):
            m = term
            for a in extra:
                m |= 1 << a
            if bg.connected(m):
                return k
    return None
