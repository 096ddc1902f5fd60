"""Arbitration of data, ancilla and magic-state resources, and admission control."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _accel
from ._accel import INF
from .floorplan import FloorplanGraph
from .placement import PlacementError, build_core, grow_single


class WorkloadState(str, Enum):
    QUEUE = "Queue"
    READY = "Ready"
    RUNNING = "Running"
    PARKED = "Parked"
    WAIT_PRIMARY = "WaitPrimary"
    WAIT_SECONDARY = "WaitSecondary"
    COMPLETE = "Complete"


S = WorkloadState
LEGAL_TRANSITIONS = {
    (S.QUEUE, S.READY),
    (S.READY, S.RUNNING),
    (S.RUNNING, S.WAIT_PRIMARY),
    (S.RUNNING, S.WAIT_SECONDARY),
    (S.RUNNING, S.PARKED),
    (S.RUNNING, S.COMPLETE),
    (S.RUNNING, S.READY),
    (S.PARKED, S.READY),
    (S.WAIT_PRIMARY, S.READY),
    (S.WAIT_SECONDARY, S.READY),
}


def is_legal(src, dst):
    return (WorkloadState(src), WorkloadState(dst)) in LEGAL_TRANSITIONS


# -- policy switches ----------------------------------------------------------

@dataclass(frozen=True)
class PolicyFlags:
    placement: str = "compact"      # compact | random
    admission: str = "online"       # online | fifo
    arbitration: str = "hierarchy"  # hierarchy | greedy
    ports: str = "deliver"          # deliver | nearest | random
    park: bool = True


POLICIES = {
    "proposed": PolicyFlags(),
    "naive": PolicyFlags("compact", "online", "greedy", "nearest", False),
    "random": PolicyFlags("random", "fifo", "greedy", "random", False),
}

ABLATIONS = {
    # the ablation table names placement and admission only; ports follow the
    # plain nearest-idle rule until arbitration is switched on in C2
    "C0": PolicyFlags("random", "fifo", "greedy", "nearest", False),
    "C1": PolicyFlags("compact", "fifo", "greedy", "nearest", False),
    "C2": PolicyFlags("compact", "fifo", "hierarchy", "deliver", True),
    "C3": POLICIES["proposed"],
}


def resolve_flags(policy="proposed", ablation=None):
    if ablation:
        if ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {ablation!r}")
        return ABLATIONS[ablation]
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    return POLICIES[policy]


# -- magic-state ports ----------------------------------------------------------

@dataclass
class MagicRequest:
    workload: int
    issued_at: int
    count: int


@dataclass
class PortModel:
    port: int
    t_init: int = 11
    t_prep: int = 11
    busy_until: int = 0
    warmed: bool = False


class PortBank:
    """Vectorised state of all magic-state ports.

    A port starts a new state at ``max(t, busy)``; the first state of a port
    that has never produced pays ``t_init`` extra.  ``busy`` is the cycle the
    port finishes its last committed state.
    """

    def __init__(self, tiles, t_init=11, t_prep=11, warmed=False):
        if t_init < 0 or t_prep < 0:
            raise ValueError("port latencies must be non-negative")
        self.tiles = np.asarray(tiles, dtype=np.int64)
        self.t_init = int(t_init)
        self.t_prep = int(t_prep)
        self.busy = np.zeros(self.tiles.size, dtype=np.int64)
        self.warm = np.full(self.tiles.size, bool(warmed))
        self.produced = np.zeros(self.tiles.size, dtype=np.int64)

    @classmethod
    def booted(cls, tiles, t_init=11, t_prep=11, t0=0):
        """Ports that all start warming up at ``t0``; none can finish a state before ``t0 + t_init + t_prep``."""
        bank = cls(tiles, t_init, t_prep, warmed=True)
        bank.busy[:] = t0 + bank.t_init
        return bank

    @classmethod
    def from_models(cls, models):
        bank = cls([m.port for m in models], 0, 0)
        bank.t_init = models[0].t_init if models else 0
        bank.t_prep = models[0].t_prep if models else 0
        bank.busy[:] = [m.busy_until for m in models]
        bank.warm[:] = [m.warmed for m in models]
        return bank

    def ready_times(self, t):
        """Cycle at which each port would finish a state requested at ``t``."""
        return np.maximum(t, self.busy) + np.where(self.warm, 0, self.t_init) + self.t_prep

    def commit(self, k, t):
        done = int(self.ready_times(t)[k])
        self.busy[k] = done
        self.warm[k] = True
        self.produced[k] += 1
        return done

    def idle(self, t):
        return self.busy <= t


def assign_port(bank: PortBank, L, t):
    """Pick the port with the earliest delivery ``ready + L`` and commit it.

    ``L`` is the per-port hop latency to the requesting workload.  Returns
    ``(port tile, delivery cycle)``; ties go to the lowest port index.
    """
    deliver = bank.ready_times(t) + L
    k = int(np.argmin(deliver))
    bank.commit(k, t)
    return int(bank.tiles[k]), int(deliver[k])


def _schedule(bank: PortBank, L, t, mu, nearest):
    L = np.ascontiguousarray(L, dtype=np.int64)
    idx, deliver = _accel.schedule_ports(bank.busy, bank.warm, np.int64(bank.t_init), np.int64(bank.t_prep),
                                         L, np.int64(t), int(mu), bool(nearest))
    np.add.at(bank.produced, idx, 1)
    return [(int(bank.tiles[k]), int(d)) for k, d in zip(idx, deliver)]


def schedule_deliver(bank: PortBank, L, t, mu):
    """Earliest-delivery port per state; equivalent to ``mu`` calls of :func:`assign_port`."""
    return _schedule(bank, L, t, mu, False)


def schedule_nearest(bank: PortBank, L, t, mu):
    """Nearest idle port per state (nearest port overall if none is idle)."""
    return _schedule(bank, L, t, mu, True)


def schedule_random(bank: PortBank, L, t, mu, rng):
    out = []
    for _ in range(mu):
        idle = np.flatnonzero(bank.idle(t))
        pool = idle if idle.size else np.arange(bank.tiles.size)
        k = int(pool[rng.integers(pool.size)])
        done = bank.commit(k, t)
        out.append((int(bank.tiles[k]), done + int(L[k])))
    return out


def request_order(reqs, t):
    """Port contention order: oldest request, then lower latency, then lower id.

    ``reqs`` holds ``(wid, t_req, latency)`` triples.
    """
    return sorted(reqs, key=lambda r: (-(t - r[1]), r[2], r[0]))


# -- ancilla arbitration --------------------------------------------------------

class Decision(str, Enum):
    GRANT = "grant"
    WAIT_PRIMARY = "wait_primary"
    WAIT_SECONDARY = "wait_secondary"
    PARK = "park"


@dataclass
class Candidate:
    """A resident at a phase boundary asking for its next phase's ancilla."""
    wid: int
    r_prim: int
    d_sec: int
    blocking: int
    t_req: int
    P: frozenset          # nominal primary scratchpad (non-core ancilla adjacent to V_i)
    dvec: object          # hop distance from every tile to V_i
    core_size: int = 0
    parkable: bool = True  # only a Running resident at a boundary may be parked


@dataclass
class Outcome:
    wid: int
    decision: Decision
    primary: tuple = ()
    secondary: tuple = ()
    extra: int = 0        # routing cycles added by far-away secondary tiles

    @property
    def tiles(self):
        return self.primary + self.secondary


def arbitration_order(cands, flags: PolicyFlags):
    if flags.arbitration == "hierarchy":
        return sorted(cands, key=lambda c: (-c.blocking, c.t_req, c.wid))
    return sorted(cands, key=lambda c: (c.t_req, c.wid))


def arbitrate_ancilla(cands, free, flags: PolicyFlags, core_total=0, c_a=None,
                      p_weight=None, t=0, starvation_age=None):
    """Decide grant / wait / park for every boundary candidate.

    ``free`` is the set of ancilla tiles not in any core and not granted.
    ``p_weight[a]`` counts the residents whose primary scratchpad contains
    ``a``; the hierarchy policy steers primary and secondary picks away from
    heavily shared tiles.  ``core_total`` is the summed core size of every
    non-parked resident.  Returns outcomes in arbitration order.
    """
    free = set(free)
    order = arbitration_order(cands, flags)
    outcomes = {}
    if flags.park and c_a is not None and core_total > c_a:
        for c in reversed(order):
            if core_total <= c_a:
                break
            if not c.parkable:
                continue
            outcomes[c.wid] = Outcome(c.wid, Decision.PARK)
            core_total -= c.core_size
    pw = (lambda a: int(p_weight[a])) if p_weight is not None else (lambda a: 0)
    blocked = False
    for c in order:
        if c.wid in outcomes:
            continue
        if blocked:
            outcomes[c.wid] = Outcome(c.wid, Decision.WAIT_SECONDARY)
            continue
        if flags.arbitration == "hierarchy":
            out = _carve_hierarchy(c, free, pw)
        else:
            out = _carve_greedy(c, free)
        if out.decision is Decision.GRANT:
            free.difference_update(out.tiles)
        elif starvation_age is not None and t - c.t_req >= starvation_age:
            # hold the shared pool for a request that has waited too long
            blocked = True
        outcomes[c.wid] = out
    return [outcomes[c.wid] for c in order]


def _nearest(tiles, dvec, key2=None):
    if key2 is None:
        return sorted(tiles, key=lambda a: (int(dvec[a]), a))
    return sorted(tiles, key=lambda a: (int(dvec[a]), key2(a), a))


def _carve_hierarchy(c: Candidate, free, pw):
    avail = [a for a in c.P if a in free]
    need = c.r_prim
    if len(avail) >= need:
        primary = sorted(avail, key=lambda a: (pw(a), a))[:need]
        spill = 0
    elif len(c.P) >= need:
        # the region exists but a neighbour's grant currently overlaps it
        return Outcome(c.wid, Decision.WAIT_PRIMARY)
    else:
        primary = sorted(avail)
        spill = need - len(avail)
    want = spill + c.d_sec
    secondary = []
    if want > 0:
        pool = [a for a in free if a not in c.P and c.dvec[a] < INF]
        if len(pool) < want:
            return Outcome(c.wid, Decision.WAIT_SECONDARY)
        secondary = _nearest(pool, c.dvec, pw)[:want]
    extra = max((int(c.dvec[a]) - 1 for a in secondary), default=0)
    return Outcome(c.wid, Decision.GRANT, tuple(primary), tuple(secondary), extra)


def _carve_greedy(c: Candidate, free):
    want = c.r_prim + c.d_sec
    pool = [a for a in free if c.dvec[a] < INF]
    if len(pool) < want:
        return Outcome(c.wid, Decision.WAIT_SECONDARY)
    picks = _nearest(pool, c.dvec)[:want]
    extra = max(int(c.dvec[a]) - 1 for a in picks) if picks else 0
    return Outcome(c.wid, Decision.GRANT, tuple(picks), (), extra)


# -- admission -------------------------------------------------------------------

@dataclass
class Admission:
    wid: int
    cluster: list
    A: frozenset
    edges: frozenset
    root: int
    fits: bool = True
    slack: int = 0


@dataclass
class AdmissionContext:
    """Snapshot of the free resources an admission decision may use."""
    g: FloorplanGraph
    free_data: set
    pool: set                     # ancilla outside every core (grants ignored)
    free_mask: object             # V^free as a bool array (data + ancilla, unowned)
    anchor: object = None         # distance vector used to pick cluster seeds
    core_total: int = 0
    c_a: object = None            # core budget; None disables the check
    grant_capacity: int = 0       # ancilla left for phase grants after all cores
    max_demand: int = 0           # largest per-phase ancilla demand among residents
    rng: object = None
    busy: frozenset = frozenset()  # ancilla currently granted to running phases
    idle: bool = False            # nothing resident; randomised placement must not stall


def data_regions(g: FloorplanGraph, free_mask):
    """Label free regions and count the free data tiles in each."""
    labels, k = _accel.components(g.indptr, g.indices, np.ascontiguousarray(free_mask, dtype=np.bool_))
    counts = np.bincount(labels[(labels >= 0) & g.is_data], minlength=k) if k else np.zeros(0, dtype=np.int64)
    return labels, counts


def _core_for(ctx: AdmissionContext, cluster, flags):
    try:
        if flags.placement == "random":
            return random_core(ctx.g, cluster, cluster[0], ctx.pool, ctx.rng)
        return build_core(ctx.g, cluster, cluster[0], ctx.pool)
    except PlacementError:
        return None


def _residency_safe(ctx: AdmissionContext, A, demand):
    if A & ctx.busy:
        return False              # core tiles are mid-phase in someone's grant
    if ctx.c_a is not None and ctx.core_total + len(A) > ctx.c_a:
        return False
    # every resident must still be able to run its largest phase eventually
    return max(demand, ctx.max_demand) <= ctx.grant_capacity - len(A)


def place_compact(ctx: AdmissionContext, q, labels, counts):
    """Best-fit compact cluster: inside the smallest free region that can hold q, else global."""
    g = ctx.g
    fd = np.zeros(g.n, dtype=np.bool_)
    if ctx.free_data:
        fd[np.fromiter(ctx.free_data, dtype=np.int64)] = True
    fitting = [(int(counts[r]) - q, r) for r in range(counts.size) if counts[r] >= q]
    if fitting:
        slack, r = min(fitting)
        return grow_single(g, q, fd & (labels == r), ctx.anchor), True, slack
    if len(ctx.free_data) < q:
        return None
    return grow_single(g, q, fd, ctx.anchor), False, len(ctx.free_data) - q


def place_random(ctx: AdmissionContext, q):
    """Random seed, then random growth among free data within two hops of the cluster."""
    g, rng = ctx.g, ctx.rng
    free = sorted(ctx.free_data)
    if q <= 0:
        return [], True, 0
    if len(free) < q:
        return None
    avail = np.zeros(g.n, dtype=np.bool_)
    avail[free] = True
    s = free[rng.integers(len(free))]
    cl = [s]
    avail[s] = False
    mind = np.array(g.dist_row(s), dtype=np.int32)
    while len(cl) < q:
        near = np.flatnonzero(avail & (mind <= 2))
        if near.size == 0:
            masked = np.where(avail, mind, INF)
            near = np.flatnonzero(masked == masked.min())
        v = int(near[rng.integers(near.size)])
        cl.append(v)
        avail[v] = False
        np.minimum(mind, g.dist_row(v), out=mind)
    return cl, True, 0


def random_core(g: FloorplanGraph, D, root, free_ancilla, rng):
    """Connect D to root along random breadth-first paths, ignoring ancilla cost."""
    D = [int(v) for v in D]
    pool = set(int(a) for a in free_ancilla) - set(D)
    allowed = pool | set(D)
    core = {int(root)}
    remaining = [v for v in D if v != root]
    rng.shuffle(remaining)
    A, edges = set(), set()
    for target in remaining:
        if target in core:
            continue
        parent = {v: None for v in core}
        frontier = list(core)
        rng.shuffle(frontier)
        found = False
        while frontier and not found:
            nxt = []
            for v in frontier:
                nb = list(g.neighbors(v))
                rng.shuffle(nb)
                for u in nb:
                    if u in parent or u not in allowed:
                        continue
                    parent[u] = v
                    if u == target:
                        found = True
                        break
                    nxt.append(u)
                if found:
                    break
            frontier = nxt
        if not found:
            raise PlacementError(f"data tile {target} unreachable")
        v = target
        while parent[v] is not None:
            u = parent[v]
            edges.add((min(u, v), max(u, v)))
            if v in pool:
                A.add(v)
                pool.discard(v)
            core.add(v)
            v = u
        core.add(target)
    return frozenset(A), frozenset(edges)


RANDOM_DRAWS = 16


def _candidate(ctx, w, demand, flags, labels, counts, cache):
    if w.id in cache:
        entry = cache[w.id]
    else:
        entry = None
        # random placement redraws until it finds a routable cluster
        draws = RANDOM_DRAWS if flags.placement == "random" else 1
        for _ in range(draws):
            if flags.placement == "random":
                placed = place_random(ctx, w.qubits)
            else:
                placed = place_compact(ctx, w.qubits, labels, counts)
            if placed is None:
                break
            cl, fits, slack = placed
            core = _core_for(ctx, cl, flags)
            if core is not None:
                entry = (cl, fits, slack, core[0], core[1])
                break
        cache[w.id] = entry
    if entry is not None and _residency_safe(ctx, entry[3], demand):
        cl, fits, slack, A, E = entry
        return Admission(w.id, list(cl), A, E, cl[0], fits, slack)
    if ctx.idle and flags.placement == "random":
        # an empty machine falls back to compact growth so the run always progresses
        placed = place_compact(ctx, w.qubits, labels, counts)
        if placed is not None:
            cl, fits, slack = placed
            try:
                A, E = build_core(ctx.g, cl, cl[0], ctx.pool)
            except PlacementError:
                return None
            if _residency_safe(ctx, A, demand):
                return Admission(w.id, list(cl), A, E, cl[0], fits, slack)
    return None


def admission_key(adm: Admission, w):
    """Online preference: fits one free region, larger q, older arrival, lower id."""
    return (not adm.fits, -w.qubits, w.arrival, w.id)


def choose_admission(ctx: AdmissionContext, queue, demands, flags: PolicyFlags, cache=None):
    """Pick the next workload to admit from ``queue`` (arrival order), or None.

    ``demands[wid]`` is the workload's largest per-phase ancilla demand.
    ``cache`` memoises cluster and core per workload; the caller clears it
    whenever data tiles or cores change.
    """
    cache = {} if cache is None else cache
    if not queue:
        return None
    labels, counts = data_regions(ctx.g, ctx.free_mask)
    if flags.admission == "fifo":
        w = queue[0]
        adm = _candidate(ctx, w, demands[w.id], flags, labels, counts, cache)
        return (w, adm) if adm is not None else None
    best = None
    for w in queue:
        if w.qubits > len(ctx.free_data):
            continue
        adm = _candidate(ctx, w, demands[w.id], flags, labels, counts, cache)
        if adm is None:
            continue
        k = admission_key(adm, w)
        if best is None or k < best[0]:
            best = (k, w, adm)
    return (best[1], best[2]) if best else None


def data_limited_admission(g: FloorplanGraph, free_data, free_mask, waiting, anchor=None):
    """Admit by (-q, slack) with best-fit regions; feasibility recomputed after each pick.

    Only data tiles are considered.  Returns ``[(wid, cluster), ...]``.
    """
    free_data = set(free_data)
    free_mask = np.array(free_mask, dtype=np.bool_)
    left = list(waiting)
    out = []
    while left:
        ctx = AdmissionContext(g, free_data, set(), free_mask, anchor)
        labels, counts = data_regions(g, free_mask)
        best = None
        for w in left:
            placed = place_compact(ctx, w.qubits, labels, counts)
            if placed is None:
                continue
            cl, _, slack = placed
            k = (-w.qubits, slack, w.id)
            if best is None or k < best[0]:
                best = (k, w, cl)
        if best is None:
            break
        _, w, cl = best
        out.append((w.id, cl))
        left.remove(w)
        free_data -= set(cl)
        free_mask[cl] = False
    return out
