"""Hot graph kernels.

Every kernel has a numba implementation and a pure-numpy twin with the same
signature.  Set ``TILEMP_DISABLE_NUMBA=1`` (or have numba missing) to route
all calls through the numpy path; the two are checked against each other in
the test-suite and compared in ``benchmarks/bench_kernels.py``.
"""
import os

import numpy as np

INF = np.int32(2**30)

_DISABLED = os.environ.get("TILEMP_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba as nb
    HAS_NUMBA = True
except ImportError:
    nb = None
    HAS_NUMBA = False

njit_kwargs = {"nogil": True, "cache": True}


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

def _bfs_all_pairs_loop(indptr, indices, n):
    dist = np.full((n, n), INF, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    for s in range(n):
        row = dist[s]
        row[s] = 0
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            u = queue[head]
            head += 1
            du = row[u] + 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if row[v] == INF:
                    row[v] = du
                    queue[tail] = v
                    tail += 1
    return dist


def _zero_one_bfs_loop(indptr, indices, cost, allowed, sources):
    # cost[v] is paid on entering v; sources start at 0.
    n = cost.shape[0]
    h = np.full(n, INF, dtype=np.int32)
    # deque in a flat buffer: each edge relaxes at most once, so pushes on
    # either side are bounded by n + |E|
    half = n + indices.shape[0] + 2
    dq = np.empty(2 * half, dtype=np.int32)
    head = half
    tail = half
    for s in range(n):
        if sources[s]:
            h[s] = 0
            dq[tail] = s
            tail += 1
    done = np.zeros(n, dtype=np.bool_)
    while head < tail:
        u = dq[head]
        head += 1
        if done[u]:
            continue
        done[u] = True
        hu = h[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if not allowed[v] or done[v]:
                continue
            nv = hu + cost[v]
            if nv < h[v]:
                h[v] = nv
                if cost[v] == 0:
                    head -= 1
                    dq[head] = v
                else:
                    dq[tail] = v
                    tail += 1
    return h


def _tight_hops_loop(indptr, indices, cost, allowed, sources, h):
    # BFS hop count restricted to edges on some minimum-cost path.
    n = cost.shape[0]
    g = np.full(n, INF, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    tail = 0
    for s in range(n):
        if sources[s]:
            g[s] = 0
            queue[tail] = s
            tail += 1
    head = 0
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if not allowed[v] or g[v] != INF:
                continue
            if h[v] == h[u] + cost[v]:
                g[v] = g[u] + 1
                queue[tail] = v
                tail += 1
    return g


def _components_loop(indptr, indices, mask):
    n = mask.shape[0]
    labels = np.full(n, -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int32)
    ncomp = 0
    for s in range(n):
        if not mask[s] or labels[s] >= 0:
            continue
        labels[s] = ncomp
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if mask[v] and labels[v] < 0:
                    labels[v] = ncomp
                    queue[tail] = v
                    tail += 1
        ncomp += 1
    return labels, ncomp


def _grow_cluster_loop(dist, avail, seed, q):
    # Definition-1 growth from `seed` over vertices flagged in `avail`;
    # lowest index wins ties.  Returns the vertices in insertion order.
    n = avail.shape[0]
    order = np.empty(q, dtype=np.int32)
    taken = np.zeros(n, dtype=np.bool_)
    mind = np.full(n, INF, dtype=np.int32)
    order[0] = seed
    taken[seed] = True
    for v in range(n):
        mind[v] = dist[seed, v]
    for step in range(1, q):
        best = -1
        bestd = INF
        for v in range(n):
            if avail[v] and not taken[v] and mind[v] < bestd:
                bestd = mind[v]
                best = v
        if best < 0:
            return order[:step]
        order[step] = best
        taken[best] = True
        row = dist[best]
        for v in range(n):
            if row[v] < mind[v]:
                mind[v] = row[v]
    return order


def _nearest_avail_loop(dvec, avail):
    best = -1
    bestd = INF
    for v in range(avail.shape[0]):
        if avail[v] and dvec[v] < bestd:
            bestd = dvec[v]
            best = v
    return best


def _schedule_ports_loop(busy, warm, t_init, t_prep, L, t, mu, nearest):
    # Commit mu magic states.  nearest=False: earliest delivery (ready + L);
    # nearest=True: lowest-latency idle port, else lowest latency overall.
    k = busy.shape[0]
    ports = np.empty(mu, dtype=np.int64)
    deliver = np.empty(mu, dtype=np.int64)
    for j in range(mu):
        best = -1
        bestv = np.int64(2**62)
        if nearest:
            for p in range(k):
                if busy[p] <= t and L[p] < bestv:
                    bestv = L[p]
                    best = p
            if best < 0:
                for p in range(k):
                    if L[p] < bestv:
                        bestv = L[p]
                        best = p
        else:
            for p in range(k):
                v = max(t, busy[p]) + t_prep + L[p]
                if not warm[p]:
                    v += t_init
                if v < bestv:
                    bestv = v
                    best = p
        ready = max(t, busy[best]) + t_prep
        if not warm[best]:
            ready += t_init
        busy[best] = ready
        warm[best] = True
        ports[j] = best
        deliver[j] = ready + L[best]
    return ports, deliver


# ---------------------------------------------------------------------------
# pure-numpy twins
# ---------------------------------------------------------------------------

def _csr_expand(indptr, indices, verts):
    starts = indptr[verts]
    counts = indptr[verts + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=indices.dtype)
    owner = np.repeat(np.arange(verts.shape[0]), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return owner, indices[np.repeat(starts, counts) + offs]


def _bfs_all_pairs_np(indptr, indices, n):
    dist = np.full((n, n), INF, dtype=np.int32)
    src = np.arange(n)
    cur = np.arange(n)
    dist[src, cur] = 0
    level = 0
    while src.size:
        level += 1
        owner, nbr = _csr_expand(indptr, indices, cur)
        s = src[owner]
        fresh = dist[s, nbr] == INF
        s = s[fresh]
        nbr = nbr[fresh]
        key = np.unique(s.astype(np.int64) * n + nbr)
        src = key // n
        cur = key % n
        dist[src, cur] = level
    return dist


def _neighbor_min(indptr, indices, vals):
    # min over CSR neighbours, INF for isolated vertices
    n = indptr.shape[0] - 1
    out = np.full(n, INF, dtype=np.int32)
    deg = np.diff(indptr)
    nz = deg > 0
    if indices.size:
        red = np.minimum.reduceat(vals[indices], indptr[:-1][nz])
        out[nz] = red
    return out


def _zero_one_bfs_np(indptr, indices, cost, allowed, sources):
    # Bellman-Ford style relaxation; converges in at most n sweeps.
    n = cost.shape[0]
    h = np.where(sources, 0, INF).astype(np.int32)
    c = cost.astype(np.int32)
    while True:
        best = _neighbor_min(indptr, indices, h)
        cand = np.where(best < INF, best + c, INF)
        cand = np.where(allowed & ~sources, cand, INF)
        new = np.minimum(h, cand).astype(np.int32)
        if np.array_equal(new, h):
            return h
        h = new


def _tight_hops_np(indptr, indices, cost, allowed, sources, h):
    n = cost.shape[0]
    g = np.where(sources, 0, INF).astype(np.int32)
    frontier = np.flatnonzero(sources)
    level = 0
    while frontier.size:
        level += 1
        owner, nbr = _csr_expand(indptr, indices, frontier)
        u = frontier[owner]
        ok = allowed[nbr] & (g[nbr] == INF) & (h[nbr] == h[u] + cost[nbr])
        nxt = np.unique(nbr[ok])
        g[nxt] = level
        frontier = nxt
    return g


def _components_np(indptr, indices, mask):
    n = mask.shape[0]
    big = np.int32(n + 1)
    lab = np.where(mask, np.arange(n, dtype=np.int32), big)
    while True:
        nb_min = _neighbor_min(indptr, indices, np.where(mask, lab, big).astype(np.int32))
        new = np.where(mask, np.minimum(lab, nb_min), big).astype(np.int32)
        if np.array_equal(new, lab):
            break
        lab = new
    labels = np.full(n, -1, dtype=np.int32)
    if mask.any():
        # relabel roots in order of first appearance (matches the loop kernel)
        roots = lab[mask]
        _, first = np.unique(roots, return_index=True)
        order = np.argsort(first)
        remap = {int(r): i for i, r in enumerate(np.unique(roots)[order])}
        labels[mask] = np.array([remap[int(r)] for r in roots], dtype=np.int32)
        return labels, len(remap)
    return labels, 0


def _grow_cluster_np(dist, avail, seed, q):
    n = avail.shape[0]
    order = [int(seed)]
    open_ = avail.copy()
    open_[seed] = False
    mind = dist[seed].copy()
    for _ in range(1, q):
        masked = np.where(open_, mind, INF)
        best = int(np.argmin(masked))
        if masked[best] >= INF:
            break
        order.append(best)
        open_[best] = False
        np.minimum(mind, dist[best], out=mind)
    return np.asarray(order, dtype=np.int32)


def _nearest_avail_np(dvec, avail):
    masked = np.where(avail, dvec, INF)
    best = int(np.argmin(masked))
    return best if masked[best] < INF else -1


def _schedule_ports_np(busy, warm, t_init, t_prep, L, t, mu, nearest):
    ports = np.empty(mu, dtype=np.int64)
    deliver = np.empty(mu, dtype=np.int64)
    for j in range(mu):
        ready = np.maximum(t, busy) + t_prep + np.where(warm, 0, t_init)
        if nearest:
            idle = busy <= t
            p = int(np.argmin(np.where(idle, L, np.int64(2**62)))) if idle.any() else int(np.argmin(L))
        else:
            p = int(np.argmin(ready + L))
        busy[p] = ready[p]
        warm[p] = True
        ports[j] = p
        deliver[j] = ready[p] + L[p]
    return ports, deliver


if HAS_NUMBA:
    bfs_all_pairs = nb.njit(**njit_kwargs)(_bfs_all_pairs_loop)
    zero_one_bfs = nb.njit(**njit_kwargs)(_zero_one_bfs_loop)
    tight_hops = nb.njit(**njit_kwargs)(_tight_hops_loop)
    components = nb.njit(**njit_kwargs)(_components_loop)
    grow_cluster = nb.njit(**njit_kwargs)(_grow_cluster_loop)
    nearest_avail = nb.njit(**njit_kwargs)(_nearest_avail_loop)
    schedule_ports = nb.njit(**njit_kwargs)(_schedule_ports_loop)
else:
    bfs_all_pairs = _bfs_all_pairs_np
    zero_one_bfs = _zero_one_bfs_np
    tight_hops = _tight_hops_np
    components = _components_np
    grow_cluster = _grow_cluster_np
    nearest_avail = _nearest_avail_np
    schedule_ports = _schedule_ports_np

NUMPY_KERNELS = {
    "bfs_all_pairs": _bfs_all_pairs_np,
    "zero_one_bfs": _zero_one_bfs_np,
    "tight_hops": _tight_hops_np,
    "components": _components_np,
    "grow_cluster": _grow_cluster_np,
    "nearest_avail": _nearest_avail_np,
    "schedule_ports": _schedule_ports_np,
}

ACTIVE_KERNELS = {
    "bfs_all_pairs": bfs_all_pairs,
    "zero_one_bfs": zero_one_bfs,
    "tight_hops": tight_hops,
    "components": components,
    "grow_cluster": grow_cluster,
    "nearest_avail": nearest_avail,
    "schedule_ports": schedule_ports,
}


def backend():
    return "numba" if HAS_NUMBA else "numpy"
