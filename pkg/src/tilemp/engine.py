"""Event-driven simulation of concurrent workloads on a tile floorplan.

One tick is one surface-code cycle.  Every processed cycle runs the same
fixed order: arrivals, admission and placement, phase-boundary arbitration,
magic-state service, retirement of finished phases, trace record.  Between
two processed cycles nothing can change, so the loop jumps straight to the
next cycle where something happens; the trace stores each constant stretch
as one segment and the per-tick CSV expands them.
"""
from dataclasses import dataclass, field, replace
import zlib

import numpy as np

from . import _accel
from .config import SimConfig
from .cultivation import CultivationField, CultivationParams, NEVER, assign_magic
from .floorplan import FloorplanGraph, Occupancy, TileClass, build_grid
from .placement import build_core
from .policies import (
    AdmissionContext, Candidate, Decision, PolicyFlags, PortBank, WorkloadState as WS,
    arbitrate_ancilla, choose_admission, is_legal, request_order, resolve_flags,
    schedule_deliver, schedule_nearest, schedule_random,
)
from .workload import GeneratorSpec, WorkloadMix, load_workloads, phase_arrays, sample_mix

IDEAL = PolicyFlags()


@dataclass
class Segment:
    t0: int
    t1: int                  # exclusive
    free_total: int
    cmax_num: int
    n_running: int
    n_parked: int
    n_waitp: int
    n_waits: int
    n_ready: int
    n_queue: int
    digest: int

    @property
    def cmax_frac(self):
        return 1.0 if self.free_total == 0 else self.cmax_num / self.free_total


@dataclass
class WorkloadRecord:
    id: int
    qubits: int
    columns: int
    size_class: str
    arrival: int
    admitted: int = -1
    completed: int = -1
    transitions: list = field(default_factory=list)   # (cycle, state) in order
    tiles: dict = field(default_factory=dict)         # placement at admission
    magic_consumed: int = 0
    solo: int = 0              # contention-free time on its own placement
    ref_solo: int = 0          # standalone time on the empty reference floorplan

    def dwell(self, end=None):
        """Cycles spent in each state, from the transition log."""
        out = {}
        tr = self.transitions
        for (t0, s), nxt in zip(tr, tr[1:] + [(end, None)]):
            t1 = nxt[0]
            if t1 is None or s == WS.COMPLETE.value:
                continue
            out[s] = out.get(s, 0) + (t1 - t0)
        return out


@dataclass
class SimTrace:
    config: dict
    segments: list
    records: list
    makespan: int
    incomplete: list
    horizon_hit: bool
    audit: dict

    def ticks(self):
        """Per-cycle rows ``(t, free_total, cmax_frac, n_running, n_parked, n_waitp, n_waits)``."""
        for s in self.segments:
            row = (s.free_total, s.cmax_frac, s.n_running, s.n_parked, s.n_waitp, s.n_waits)
            for t in range(s.t0, s.t1):
                yield (t,) + row


class _Resident:
    __slots__ = ("w", "wid", "mu", "rprim", "dsec", "dur", "beta", "k", "state", "D", "A", "root",
                 "V", "P", "dvec", "portL", "grant", "phase_end", "t_req", "pending", "deliveries",
                 "phase_start", "extra", "parked_since", "demand", "order")

    def __init__(self, w, model):
        self.w = w
        self.wid = w.id
        mu, rp, ds, dur, beta = phase_arrays(w, model)
        self.mu, self.rprim, self.dsec = mu.tolist(), rp.tolist(), ds.tolist()
        self.dur, self.beta = dur.tolist(), beta.tolist()
        self.demand = int((rp + ds).max())
        self.k = 0
        self.state = WS.QUEUE
        self.D = ()
        self.A = frozenset()
        self.root = -1
        self.V = frozenset()
        self.P = frozenset()
        self.dvec = None
        self.portL = None
        self.grant = ()
        self.phase_end = None
        self.t_req = 0
        self.pending = 0
        self.deliveries = []
        self.phase_start = 0
        self.extra = 0
        self.parked_since = -1


def magic_floorplan(g: FloorplanGraph, mode):
    """Cultivation floorplans have no ports: port tiles become ancilla."""
    if mode != "cultivation" or g.ports.size == 0:
        return g
    cls = g.tile_class.copy()
    cls[cls == TileClass.PORT] = TileClass.ANCILLA
    return FloorplanGraph(g.rows, g.cols, cls, g.indptr, g.indices, spec=g.spec)


class Simulation:
    """One simulation run.  Construct, then call :meth:`run`."""

    def __init__(self, cfg: SimConfig, g: FloorplanGraph, workloads, flags: PolicyFlags = None,
                 pinned=None, prewarm=False, record_solo=True):
        self.cfg = cfg
        self.g = g
        self.flags = flags or resolve_flags(cfg.policy, cfg.ablation or None)
        self.model = cfg.phase_model()
        self.rng = np.random.default_rng([cfg.seed, 7])
        self.occ = Occupancy(g)
        self.cult = None
        self.bank = None
        if cfg.mode == "cultivation":
            self.cult = CultivationField(g.n, g.ancilla.tolist(),
                                         CultivationParams(cfg.cultivation_latency, cfg.p_fail),
                                         rng=np.random.default_rng([cfg.seed, 11]), pre_ready=prewarm)
        else:
            if cfg.port_warmup == "boot" and not prewarm:
                self.bank = PortBank.booted(g.ports, cfg.t_init_port, cfg.t_prep)
            else:
                self.bank = PortBank(g.ports, cfg.t_init_port, cfg.t_prep, warmed=prewarm)
        self.port_dist = g.dist_to_set(g.ports.tolist()) if g.ports.size else None
        self.pinned = pinned or {}
        self.res = {w.id: _Resident(w, self.model) for w in workloads}
        self.records = {w.id: WorkloadRecord(w.id, w.qubits, w.columns, w.size_class, w.arrival) for w in workloads}
        self.arrivals = sorted(workloads, key=lambda w: (w.arrival, w.id))
        self.n_anc = int(g.ancilla.size)
        self.c_a = int((1.0 - cfg.core_reserve_frac) * self.n_anc) if self.flags.park else None
        self.queue = []
        self.core_mask = np.zeros(g.n, dtype=np.bool_)
        self.core_total = 0
        self.p_weight = np.zeros(g.n, dtype=np.int32)
        self.adm_cache = {}
        self.adm_dirty = True
        self.segments = []
        self.active = {}          # admitted, not yet complete
        self.counts = {st: 0 for st in WS}
        self._free_cache = None
        self.audit = {"double_owner": 0, "illegal": [], "conservation": 0, "magic_delivered": 0}

    # -- bookkeeping -----------------------------------------------------------
    def _log(self, r: _Resident, t, state):
        rec = self.records[r.wid]
        if rec.transitions and not is_legal(rec.transitions[-1][1], state.value):
            self.audit["illegal"].append((r.wid, t, rec.transitions[-1][1], state.value))
        rec.transitions.append((t, state.value))
        if rec.transitions[:-1]:
            self.counts[r.state] -= 1
        self.counts[state] += 1
        r.state = state
        if state is WS.COMPLETE:
            self.active.pop(r.wid, None)
        elif state is not WS.QUEUE:
            self.active[r.wid] = r

    def _refresh_scratchpads(self):
        self.p_weight[:] = 0
        free_anc = self.g.is_ancilla & ~self.core_mask
        for r in self.active.values():
            if r.dvec is None or r.state is WS.PARKED:
                continue
            m = free_anc & (r.dvec == 1)
            r.P = frozenset(np.flatnonzero(m).tolist())
            self.p_weight[m] += 1

    def _set_footprint(self, r: _Resident):
        g = self.g
        r.V = frozenset(r.D) | r.A
        r.dvec = g.dist_to_set(list(r.V))
        r.portL = r.dvec[g.ports] if g.ports.size else None

    def _set_core(self, r, A, t):
        if r.A:
            if self.cult is not None:
                self.cult.release(r.A, t)
            self.occ.release(r.A)
            self.core_mask[list(r.A)] = False
            self.core_total -= len(r.A)
        r.A = frozenset(A)
        if r.A:
            self.occ.occupy(r.A, r.wid)
            self.core_mask[list(r.A)] = True
            self.core_total += len(r.A)
            if self.cult is not None:
                self.cult.claim(r.A, t)

    def _free_ancilla(self):
        return set(np.flatnonzero(self.g.is_ancilla & (self.occ.owner < 0)).tolist())

    def _busy_ancilla(self):
        return frozenset(np.flatnonzero(self.g.is_ancilla & (self.occ.owner >= 0) & ~self.core_mask).tolist())


    # -- step 2/3: admission and placement ------------------------------------------
    def _admit(self, t):
        if not self.queue or not self.adm_dirty:
            return
        self.adm_dirty = False
        g = self.g
        while self.queue:
            free_data = set(np.flatnonzero(g.is_data & (self.occ.owner < 0)).tolist())
            if min(w.qubits for w in self.queue) > len(free_data):
                return
            live = list(self.active.values())
            ctx = AdmissionContext(
                g=g, free_data=free_data,
                pool=set(np.flatnonzero(g.is_ancilla & ~self.core_mask).tolist()),
                free_mask=(self.occ.owner < 0) & ~g.is_port,
                anchor=self.port_dist,
                core_total=self.core_total, c_a=self.c_a,
                grant_capacity=self.n_anc - self.core_total,
                max_demand=max((r.demand for r in live), default=0),
                rng=self.rng, busy=self._busy_ancilla(), idle=not self.active,
            )
            pick = self._pinned_pick() if self.pinned else choose_admission(
                ctx, self.queue, {w.id: self.res[w.id].demand for w in self.queue}, self.flags, self.adm_cache)
            if pick is None:
                return
            w, adm = pick
            self.queue.remove(w)
            r = self.res[w.id]
            r.D = tuple(adm.cluster)
            r.root = adm.root
            self.occ.occupy(r.D, r.wid)
            self._set_core(r, adm.A, t)
            self._set_footprint(r)
            r.t_req = t
            self._log(r, t, WS.READY)
            rec = self.records[r.wid]
            rec.admitted = t
            rec.tiles = {"D": list(r.D), "A": sorted(r.A), "root": r.root}
            self.adm_cache.clear()
            self._refresh_scratchpads()

    def _pinned_pick(self):
        from .policies import Admission
        for w in self.queue:
            p = self.pinned[w.id]
            return w, Admission(w.id, list(p["D"]), frozenset(p["A"]), frozenset(), p["root"])
        return None

    # -- step 4: arbitration ----------------------------------------------------------
    def _resume_parked(self, t):
        parked = sorted((r for r in self.active.values() if r.state is WS.PARKED),
                        key=lambda r: (r.parked_since, r.wid))
        for r in parked:
            pool = set(np.flatnonzero(self.g.is_ancilla & (self.occ.owner < 0)).tolist())
            try:
                A, _ = build_core(self.g, r.D, r.root, pool)
            except Exception:
                continue
            if self.c_a is not None and self.core_total + len(A) > self.c_a:
                continue
            self._set_core(r, A, t)
            self._set_footprint(r)
            self._log(r, t, WS.READY)
            self._refresh_scratchpads()

    def _arbitrate(self, t):
        if self.flags.park:
            self._resume_parked(t)
        cands = []
        for r in self.active.values():
            if r.state in (WS.READY, WS.WAIT_PRIMARY, WS.WAIT_SECONDARY) or (
                    r.state is WS.RUNNING and r.phase_end is None and r.pending == 0):
                k = r.k
                cands.append(Candidate(r.wid, r.rprim[k], r.dsec[k], r.beta[k], r.t_req, r.P, r.dvec,
                                       len(r.A), parkable=r.state is WS.RUNNING))
        if not cands:
            return []
        outs = arbitrate_ancilla(cands, self._free_ancilla(), self.flags, self.core_total, self.c_a,
                                 self.p_weight, t, self.cfg.starvation_age if self.flags.arbitration == "hierarchy" else None)
        granted = []
        for o in outs:
            r = self.res[o.wid]
            if o.decision is Decision.GRANT:
                if r.state in (WS.WAIT_PRIMARY, WS.WAIT_SECONDARY):
                    self._log(r, t, WS.READY)
                if r.state is WS.READY:
                    self._log(r, t, WS.RUNNING)
                r.grant = o.tiles
                r.extra = o.extra
                r.phase_start = t
                if r.grant:
                    self.occ.occupy(r.grant, r.wid)
                    if self.cult is not None:
                        self.cult.claim(r.grant, t)
                granted.append(r)
            elif o.decision is Decision.PARK:
                self._log(r, t, WS.PARKED)
                r.parked_since = t
                self._set_core(r, (), t)
                self._set_footprint(r)
                self._refresh_scratchpads()
                self.adm_dirty = True
            elif r.state is WS.RUNNING:
                self._log(r, t, WS.WAIT_PRIMARY if o.decision is Decision.WAIT_PRIMARY else WS.WAIT_SECONDARY)
        return granted

    # -- step 5: magic-state service ------------------------------------------------------
    def _start_phases(self, granted, t):
        tphase = []
        for r in granted:
            k = r.k
            if r.mu[k] == 0:
                r.phase_end = t + r.dur[k] + r.extra - 1
            else:
                r.pending = r.mu[k]
                r.deliveries = []
                tphase.append(r)
        if not tphase:
            return
        if self.bank is not None:
            reqs = request_order([(r.wid, r.t_req, int(r.portL.min())) for r in tphase], t)
            for wid, _, _ in reqs:
                r = self.res[wid]
                mu = r.pending
                if self.flags.ports == "deliver":
                    got = schedule_deliver(self.bank, r.portL, t, mu)
                elif self.flags.ports == "nearest":
                    got = schedule_nearest(self.bank, r.portL, t, mu)
                else:
                    got = schedule_random(self.bank, r.portL, t, mu, self.rng)
                r.deliveries = sorted(d for _, d in got)
                r.pending = 0
                self._finish_magic(r)
        # cultivation requests are served in _serve_cultivation

    def _serve_cultivation(self, t):
        waiting = [r for r in self.active.values() if r.pending > 0]
        if not waiting:
            return
        waiting.sort(key=lambda r: (r.phase_start, r.wid))
        ready = self.cult.ready_set(t)
        for r in waiting:
            if not ready:
                break
            take = min(r.pending, len(ready))
            picks = assign_magic(ready, take, r.dvec)
            self.cult.consume(picks, t)
            ready.difference_update(picks)
            r.deliveries.extend(t + int(r.dvec[a]) for a in picks)
            r.pending -= take
            if r.pending == 0:
                r.deliveries.sort()
                self._finish_magic(r)

    def _finish_magic(self, r):
        k = r.k
        a = r.deliveries
        r.phase_end = max(a[0] + r.dur[k] + r.extra - 1, a[-1])
        self.audit["magic_delivered"] += len(a)
        self.records[r.wid].magic_consumed += len(a)

    # -- step 6: retire -----------------------------------------------------------------
    def _retire(self, t):
        done = [r for r in self.active.values() if r.state is WS.RUNNING and r.phase_end == t]
        changed = False
        for r in sorted(done, key=lambda r: r.wid):
            if r.grant:
                self.occ.release(r.grant)
                if self.cult is not None:
                    self.cult.release(r.grant, t)
            r.grant = ()
            r.phase_end = None
            r.k += 1
            r.t_req = t + 1
            if r.k == len(r.mu):
                self.occ.release(r.D)
                self._set_core(r, (), t)
                self._log(r, t + 1, WS.COMPLETE)
                self.records[r.wid].completed = t + 1
                changed = True
        if changed:
            self.adm_dirty = True
            self.adm_cache.clear()
            self._refresh_scratchpads()
        return bool(done)

    # -- step 7: record ------------------------------------------------------------------
    def _record(self, t, t_next):
        g = self.g
        owner = self.occ.owner
        key = self.occ.version
        if self._free_cache is None or self._free_cache[0] != key:
            free_mask = (owner < 0) & ~g.is_port
            labels, k = _accel.components(g.indptr, g.indices, free_mask)
            sizes = np.bincount(labels[labels >= 0], minlength=k) if k else np.zeros(1, dtype=np.int64)
            self._free_cache = (key, int(free_mask.sum()), int(sizes.max()) if k else 0,
                                zlib.crc32(owner.tobytes()))
            # conservation: owned tiles are exactly the residents' data, cores and grants
            held = sum(len(r.D) + len(r.A) + len(r.grant) for r in self.active.values())
            if held != int((owner >= 0).sum()):
                self.audit["conservation"] += 1
        _, free_total, cmax_num, digest = self._free_cache
        counts = self.counts
        seg = Segment(t, t_next, free_total, cmax_num, counts[WS.RUNNING], counts[WS.PARKED],
                      counts[WS.WAIT_PRIMARY], counts[WS.WAIT_SECONDARY], counts[WS.READY],
                      counts[WS.QUEUE], digest)
        last = self.segments[-1] if self.segments else None
        if last is not None and last.t1 == t and _same_row(last, seg):
            last.t1 = t_next
        else:
            self.segments.append(seg)

    # -- main loop -----------------------------------------------------------------------
    def run(self) -> SimTrace:
        horizon = self.cfg.horizon
        nxt_arrival = 0
        n = len(self.arrivals)
        t = self.arrivals[0].arrival if n else 0
        horizon_hit = False
        while n:
            # 1. arrivals
            while nxt_arrival < n and self.arrivals[nxt_arrival].arrival <= t:
                w = self.arrivals[nxt_arrival]
                nxt_arrival += 1
                self.queue.append(w)
                self._log(self.res[w.id], t, WS.QUEUE)
                self.adm_dirty = True
            # 2-3. admission + placement
            self._admit(t)
            # 4. arbitration at phase boundaries
            granted = self._arbitrate(t)
            # 5. magic-state service
            self._start_phases(granted, t)
            if self.cult is not None:
                self._serve_cultivation(t)
            # 6. retire finished phases / workloads
            if self._retire(t):
                self.adm_dirty = True
            if self.counts[WS.COMPLETE] == n:
                self._record(t, t + 1)
                break
            t_next = self._next_event(t, nxt_arrival)
            if t_next >= horizon:
                horizon_hit = True
                self._record(t, horizon)
                break
            # 7. record the stretch [t, t_next)
            self._record(t, t_next)
            t = t_next
        recs = [self.records[w.id] for w in sorted(self.arrivals, key=lambda w: w.id)]
        incomplete = [r.id for r in recs if r.completed < 0]
        makespan = max((r.completed for r in recs), default=0) if not incomplete else (self.segments[-1].t1 if self.segments else 0)
        return SimTrace(self.cfg.to_dict(), self.segments, recs, makespan, incomplete, horizon_hit, self.audit)

    def _next_event(self, t, nxt_arrival):
        cand = []
        if nxt_arrival < len(self.arrivals):
            cand.append(self.arrivals[nxt_arrival].arrival)
        pending = False
        for r in self.active.values():
            if r.state is WS.RUNNING:
                if r.phase_end is not None:
                    cand.append(r.phase_end if r.phase_end > t else t + 1)
                elif r.pending > 0:
                    pending = True
                elif r.t_req > t:
                    cand.append(r.t_req)
        if self.queue and (self.adm_dirty or not self.active):
            # an idle machine keeps retrying so randomised placement can redraw
            self.adm_dirty = True
            cand.append(t + 1)
        if pending and self.cult is not None:
            cand.append(max(t + 1, self.cult.next_ready(t)))
        if not cand:
            return int(NEVER)
        return max(t + 1, min(cand))


def _same_row(a: Segment, b: Segment):
    return (a.free_total, a.cmax_num, a.n_running, a.n_parked, a.n_waitp, a.n_waits, a.n_ready,
            a.n_queue, a.digest) == (b.free_total, b.cmax_num, b.n_running, b.n_parked, b.n_waitp,
                                     b.n_waits, b.n_ready, b.n_queue, b.digest)


# -- public entry points ------------------------------------------------------------------

def floorplan_for(cfg: SimConfig):
    return magic_floorplan(build_grid(cfg.layout()), cfg.mode)


def workloads_for(cfg: SimConfig):
    if cfg.workload_file:
        return load_workloads(cfg.workload_file)
    if cfg.count == 0:
        return []
    return sample_mix(WorkloadMix(cfg.mix, cfg.count, cfg.seed), cfg.generator())


def reference_config(cfg: SimConfig):
    """Standalone-reference settings: proposed mechanics on the port floorplan."""
    return replace(cfg, mode="ports", policy="proposed", ablation="", arrival="offline")


def run_solo(cfg: SimConfig, w, g=None, placement=None, flags=None, warm=True):
    """Completion time of ``w`` alone, arriving at 0.

    ``warm`` starts with every magic source ready; otherwise the sources start up exactly as in a full run
    beginning at cycle 0.  With ``placement`` the workload is pinned to the
    given tiles, otherwise it is placed on the empty floorplan.  Returns None
    if it cannot be placed.
    """
    g = g if g is not None else floorplan_for(cfg)
    if w.qubits > g.data.size:
        return None
    w0 = w.with_arrival(0)
    pinned = {w.id: placement} if placement is not None else None
    sim = Simulation(cfg, g, [w0], flags=flags or IDEAL, pinned=pinned, prewarm=warm)
    tr = sim.run()
    if tr.incomplete:
        return None
    return tr.records[0].completed


def empty_placement(cfg: SimConfig, g: FloorplanGraph, w):
    """Where the proposed admission would put ``w`` on an empty floorplan."""
    from .policies import choose_admission
    ctx = AdmissionContext(
        g=g, free_data=set(g.data.tolist()), pool=set(g.ancilla.tolist()),
        free_mask=~g.is_port, anchor=g.dist_to_set(g.ports.tolist()) if g.ports.size else None,
        grant_capacity=int(g.ancilla.size), rng=np.random.default_rng(0))
    model = cfg.phase_model()
    _, rp, ds, _, _ = phase_arrays(w, model)
    pick = choose_admission(ctx, [w], {w.id: int((rp + ds).max())}, IDEAL)
    if pick is None:
        return None
    adm = pick[1]
    return {"D": list(adm.cluster), "A": sorted(adm.A), "root": adm.root}


def solo_time_ports(cfg: SimConfig, g: FloorplanGraph, w, placement, warm=True, start=0):
    """Closed-form contention-free completion time in ports mode.

    Each phase starts with every port idle (a port's last state finishes
    before the phase that consumed it ends), so a phase's length depends only
    on its magic count and ancilla demand.  With ``warm=False`` and boot
    warmup, the first T-phase also waits for the ports to finish the warmup
    they began at cycle 0; ``start`` is the cycle the workload begins, so a
    late start finds them ready.  Must agree with :func:`run_solo`.
    """
    D = list(placement["D"])
    A = set(placement["A"])
    V = D + sorted(A)
    dvec = g.dist_to_set(V)
    L = dvec[g.ports].astype(np.int64)
    core = np.zeros(g.n, dtype=np.bool_)
    if A:
        core[list(A)] = True
    P = np.flatnonzero(g.is_ancilla & ~core & (dvec == 1))
    others = np.flatnonzero(g.is_ancilla & ~core & (dvec != 1))
    other_d = np.sort(dvec[others].astype(np.int64))
    model = cfg.phase_model()
    mu, rp, ds, dur, _ = phase_arrays(w, model)
    mmax = int(mu.max()) if mu.size else 0
    offsets = np.zeros(0, dtype=np.int64)
    if mmax:
        j = np.arange(1, mmax + 1, dtype=np.int64)[:, None]
        offsets = np.sort((cfg.t_prep * j + L[None, :]).ravel())[:mmax]
    boot = 0 if warm else max(0, cfg.t_init_port - start)
    total = 0
    for k in range(w.columns):
        spill = max(0, int(rp[k]) - P.size)
        want = spill + int(ds[k])
        if want > other_d.size:
            return None
        extra = int(other_d[want - 1]) - 1 if want else 0
        extra = max(extra, 0)
        m = int(mu[k])
        if m == 0:
            total += int(dur[k]) + extra
        else:
            shift = max(0, boot - total)
            boot = 0
            a0, alast = int(offsets[0]) + shift, int(offsets[m - 1]) + shift
            total += max(a0 + int(dur[k]) + extra - 1, alast) + 1
    return total


def solo_time(cfg: SimConfig, g: FloorplanGraph, w, placement=None, warm=True, start=0):
    """Contention-free time: closed form for ports with warm or booted start, simulated otherwise.

    ``start`` only matters for booted ports (see :func:`solo_time_ports`).
    """
    if w.qubits > g.data.size:
        return None
    if placement is None:
        placement = empty_placement(cfg, g, w)
        if placement is None:
            return None
    if cfg.mode == "ports" and (warm or cfg.port_warmup == "boot"):
        return solo_time_ports(cfg, g, w, placement, warm, start)
    return run_solo(cfg, w, g, placement=placement, warm=warm)


def assign_arrivals(cfg: SimConfig, workloads, ref_solo):
    """Arrival times per the configured model."""
    if cfg.arrival == "offline" or not workloads:
        return [w.with_arrival(0) for w in workloads]
    if cfg.arrival == "schedule":
        sched = list(cfg.arrival_schedule)
        if len(sched) < len(workloads):
            raise ValueError("arrival_schedule is shorter than the workload list")
        return [w.with_arrival(int(a)) for w, a in zip(workloads, sched)]
    rng = np.random.default_rng([cfg.seed, 3])
    span = cfg.arrival_span_frac * float(sum(ref_solo.get(w.id, 0) or 0 for w in workloads))
    mean_gap = span / max(1, len(workloads))
    gaps = rng.exponential(mean_gap, size=len(workloads)) if mean_gap > 0 else np.zeros(len(workloads))
    gaps[0] = 0.0
    times = np.floor(np.cumsum(gaps)).astype(np.int64)
    return [w.with_arrival(int(a)) for w, a in zip(workloads, times)]


def reference_solos(cfg: SimConfig, workloads, g_ref=None):
    rcfg = reference_config(cfg)
    g_ref = g_ref if g_ref is not None else floorplan_for(rcfg)
    # the reference starts its magic sources from cold, like any run starting at cycle 0
    return {w.id: solo_time(rcfg, g_ref, w, warm=False) for w in workloads}


def run_simulation(cfg: SimConfig, workloads=None, ref_solo=None, with_solo=True) -> SimTrace:
    """Full run: workloads, arrivals, simulation, and per-workload solo references."""
    cfg.validate()
    g = floorplan_for(cfg)
    workloads = list(workloads) if workloads is not None else workloads_for(cfg)
    ws = [w for w in workloads if w.qubits <= g.data.size]
    skipped = [w.id for w in workloads if w.qubits > g.data.size]
    if ref_solo is None:
        ref_solo = reference_solos(cfg, ws)
    ws = assign_arrivals(cfg, ws, ref_solo)
    trace = Simulation(cfg, g, ws).run()
    trace.audit["infeasible"] = skipped
    trace.audit["solo_witness"] = []
    by_id = {w.id: w for w in ws}
    booted = cfg.mode == "ports" and cfg.port_warmup == "boot"
    for rec in trace.records:
        rec.ref_solo = int(ref_solo.get(rec.id) or 0)
        if with_solo and rec.admitted >= 0:
            # booted ports have a known startup, so the pinned solo can start at the
            # admission cycle; other sources start warm
            solo = int(solo_time(cfg, g, by_id[rec.id], placement=rec.tiles, warm=not booted,
                                 start=rec.admitted) or 0)
            if cfg.mode == "cultivation" and rec.completed >= 0:
                # nearest-first consumption is not always the best order, and the run's
                # own schedule is one the workload could also follow alone
                own = rec.completed - rec.admitted
                if own < solo:
                    trace.audit["solo_witness"].append(rec.id)
                    solo = own
            rec.solo = solo
    return trace
