import numpy as np
import pytest
from hypothesis import given, strategies as st

from tilemp.floorplan import from_classes
from tilemp.policies import (
    ABLATIONS, POLICIES, AdmissionContext, Candidate, Decision, PolicyFlags, PortBank, PortModel,
    admission_key, arbitrate_ancilla, assign_port, choose_admission, data_limited_admission, is_legal,
    request_order, resolve_flags, schedule_deliver, schedule_nearest, schedule_random,
)
from tilemp.workload import Workload

PROPOSED = POLICIES["proposed"]
NAIVE = POLICIES["naive"]


def _w(wid, q, arrival=0):
    return Workload(wid, q, 1, ((),), (0,), arrival)


# -- ports ---------------------------------------------------------------------------

def test_warm_idle_port_delivers_after_prep_and_latency():
    bank = PortBank([7], t_init=11, t_prep=11, warmed=True)
    assert assign_port(bank, np.array([4]), 100) == (7, 115)


def test_cold_port_pays_its_warmup_once():
    bank = PortBank([3], t_init=11, t_prep=11)
    assert assign_port(bank, np.array([0]), 50) == (3, 72)
    assert assign_port(bank, np.array([0]), 50) == (3, 83)


def test_booted_ports_are_warming_from_the_start():
    bank = PortBank.booted([1, 2], t_init=11, t_prep=11)
    assert assign_port(bank, np.array([0, 0]), 0)[1] == 22
    assert assign_port(bank, np.array([0, 0]), 30)[1] == 41


def test_port_models_round_trip_into_bank():
    bank = PortBank.from_models([PortModel(5, 11, 11, busy_until=20, warmed=True), PortModel(9, 11, 11)])
    assert list(bank.ready_times(0)) == [31, 22]


def test_older_request_served_first():
    order = request_order([(1, 97, 2), (2, 93, 9)], t=100)
    assert [r[0] for r in order] == [2, 1]
    order = request_order([(4, 90, 5), (3, 90, 2), (1, 90, 2)], t=100)
    assert [r[0] for r in order] == [1, 3, 4]


def _earliest_oracle(busy, warm, t_init, t_prep, L, t, mu):
    busy, warm = list(busy), list(warm)
    out = []
    for _ in range(mu):
        best = None
        for p in range(len(busy)):
            ready = max(t, busy[p]) + t_prep + (0 if warm[p] else t_init)
            if best is None or ready + L[p] < best[0]:
                best = (ready + L[p], p, ready)
        d, p, ready = best
        busy[p], warm[p] = ready, True
        out.append((p, d))
    return out


@given(st.data())
def test_deliver_schedule_matches_brute_force(data):
    k = data.draw(st.integers(1, 6))
    busy = data.draw(st.lists(st.integers(0, 60), min_size=k, max_size=k))
    warm = data.draw(st.lists(st.booleans(), min_size=k, max_size=k))
    L = data.draw(st.lists(st.integers(0, 20), min_size=k, max_size=k))
    t, mu = data.draw(st.integers(0, 50)), data.draw(st.integers(0, 12))
    bank = PortBank(list(range(10, 10 + k)), 11, 11)
    bank.busy[:] = busy
    bank.warm[:] = warm
    got = schedule_deliver(bank, np.array(L), t, mu)
    want = _earliest_oracle(busy, warm, 11, 11, L, t, mu)
    assert [(p - 10, d) for p, d in got] == want


@given(st.data())
def test_ports_never_overlap_preparations(data):
    k = data.draw(st.integers(1, 5))
    L = np.array(data.draw(st.lists(st.integers(0, 15), min_size=k, max_size=k)))
    bank = PortBank(list(range(k)), 11, 11)
    per_port = {}
    t = 0
    for _ in range(data.draw(st.integers(1, 8))):
        t += data.draw(st.integers(0, 30))
        mode = data.draw(st.sampled_from(["deliver", "nearest", "random"]))
        mu = data.draw(st.integers(1, 6))
        if mode == "deliver":
            got = schedule_deliver(bank, L, t, mu)
        elif mode == "nearest":
            got = schedule_nearest(bank, L, t, mu)
        else:
            got = schedule_random(bank, L, t, mu, np.random.default_rng(t))
        for p, d in got:
            assert d >= t + 11 + L[p]
            per_port.setdefault(p, []).append(d - L[p])
    for p, readies in per_port.items():
        readies.sort()
        assert all(b - a >= 11 for a, b in zip(readies, readies[1:]))
        assert int(bank.produced[p]) == len(readies)


def test_nearest_prefers_idle_ports():
    bank = PortBank([0, 1], 0, 11, warmed=True)
    bank.busy[:] = [40, 0]
    (p, d), = schedule_nearest(bank, np.array([1, 9]), 10, 1)
    assert (p, d) == (1, 30)


def test_rejects_negative_latency():
    with pytest.raises(ValueError):
        PortBank([0], t_init=-1)


# -- ancilla arbitration -----------------------------------------------------------

def _cand(wid, P, r=2, d=0, blocking=1, t_req=0, core=0, dvec=None):
    return Candidate(wid, r, d, blocking, t_req, frozenset(P),
                     dvec if dvec is not None else np.ones(64, dtype=np.int32), core)


def test_single_resident_with_ample_pool_is_granted():
    (out,) = arbitrate_ancilla([_cand(0, {1, 2, 3})], {1, 2, 3, 4}, PROPOSED)
    assert out.decision is Decision.GRANT and len(out.primary) == 2


def test_overlapping_primary_regions_make_the_loser_wait():
    a = _cand(0, {1, 2, 3}, t_req=5)
    b = _cand(1, {1, 2, 3}, t_req=2)
    outs = {o.wid: o for o in arbitrate_ancilla([a, b], {1, 2, 3}, PROPOSED)}
    assert outs[1].decision is Decision.GRANT
    assert outs[0].decision is Decision.WAIT_PRIMARY


def test_blocking_phase_outranks_older_clifford_phase():
    a = _cand(0, {1, 2}, blocking=0, t_req=0)
    b = _cand(1, {1, 2}, blocking=1, t_req=9)
    outs = arbitrate_ancilla([a, b], {1, 2}, PROPOSED)
    assert [o.wid for o in outs] == [1, 0]
    assert outs[0].decision is Decision.GRANT


def test_core_budget_parks_lowest_priority():
    cands = [_cand(i, {10 + i, 20 + i}, r=1, t_req=i, core=4) for i in range(3)]
    outs = {o.wid: o.decision for o in arbitrate_ancilla(cands, set(range(64)), PROPOSED,
                                                         core_total=12, c_a=8)}
    assert outs == {0: Decision.GRANT, 1: Decision.GRANT, 2: Decision.PARK}


def test_no_parking_without_the_park_switch():
    cands = [_cand(i, {10 + i, 20 + i}, r=1, t_req=i, core=4) for i in range(3)]
    outs = arbitrate_ancilla(cands, set(range(64)), NAIVE, core_total=12, c_a=8)
    assert all(o.decision is Decision.GRANT for o in outs)


def test_secondary_shortage_means_wait_secondary():
    c = _cand(0, {1}, r=1, d=3)
    (out,) = arbitrate_ancilla([c], {1, 5, 6}, PROPOSED)
    assert out.decision is Decision.WAIT_SECONDARY
    (out,) = arbitrate_ancilla([c], {1, 5, 6, 7}, PROPOSED)
    assert out.decision is Decision.GRANT and sorted(out.secondary) == [5, 6, 7]


def test_secondary_tiles_are_nearest_and_add_routing_time():
    dvec = np.full(64, 9, dtype=np.int32)
    dvec[[5, 6, 7]] = [1, 4, 2]
    c = _cand(0, {1}, r=1, d=2, dvec=dvec)
    (out,) = arbitrate_ancilla([c], {1, 5, 6, 7}, PROPOSED)
    assert sorted(out.secondary) == [5, 7] and out.extra == 1


@given(st.data())
def test_grants_never_share_tiles(data):
    free = set(data.draw(st.lists(st.integers(0, 30), max_size=25)))
    cands = []
    for i in range(data.draw(st.integers(1, 6))):
        P = data.draw(st.sets(st.integers(0, 30), max_size=6))
        cands.append(_cand(i, P, r=data.draw(st.integers(0, 4)), d=data.draw(st.integers(0, 3)),
                           blocking=data.draw(st.integers(0, 1)), t_req=data.draw(st.integers(0, 9))))
    flags = data.draw(st.sampled_from([PROPOSED, NAIVE]))
    taken = set()
    for o in arbitrate_ancilla(cands, free, flags):
        if o.decision is Decision.GRANT:
            tiles = set(o.tiles)
            assert len(tiles) == len(o.tiles)
            assert tiles <= free and not (tiles & taken)
            taken |= tiles


# -- admission -----------------------------------------------------------------------

def test_data_limited_admission_prefers_large_then_best_fit():
    g = from_classes(1, 9, "DDDDDADDD")
    free_mask = np.ones(9, dtype=bool)
    free_mask[5] = False
    out = data_limited_admission(g, set(g.data.tolist()), free_mask, [_w(0, 3), _w(1, 5)])
    assert [wid for wid, _ in out] == [1, 0]
    assert sorted(out[0][1]) == [0, 1, 2, 3, 4]
    assert sorted(out[1][1]) == [6, 7, 8]


def test_data_limited_admission_best_fit_region():
    g = from_classes(1, 9, "DDDDDADDD")
    free_mask = np.ones(9, dtype=bool)
    free_mask[5] = False
    ((wid, cl),) = data_limited_admission(g, set(g.data.tolist()), free_mask, [_w(0, 3)])
    assert sorted(cl) == [6, 7, 8]


def test_data_limited_admission_infeasible():
    g = from_classes(1, 3, "DAD")
    assert data_limited_admission(g, {0, 2}, np.ones(3, dtype=bool), [_w(0, 3)]) == []


def _ctx(g, free_mask=None, **kw):
    fm = np.ones(g.n, dtype=bool) if free_mask is None else free_mask
    fm &= ~g.is_port
    kw.setdefault("grant_capacity", 100)
    return AdmissionContext(g, set(int(v) for v in g.data if fm[v]), set(g.ancilla.tolist()), fm, **kw)


def test_single_arrival_on_empty_floorplan_is_admitted():
    g = from_classes(2, 3, "DDD AAA")
    w = _w(0, 3)
    got = choose_admission(_ctx(g), [w], {0: 2}, PROPOSED)
    assert got[0] is w and sorted(got[1].cluster) == [0, 1, 2]


def test_fitting_arrival_beats_straddling_one():
    g = from_classes(2, 7, "DDDADDD AAAAAAA")
    fm = np.ones(g.n, dtype=bool)
    fm[[3, 10]] = False   # splits the free tiles into two regions of three data tiles
    big, small = _w(0, 4), _w(1, 3, arrival=5)
    w, adm = choose_admission(_ctx(g, fm), [big, small], {0: 1, 1: 1}, PROPOSED)
    assert w is small and adm.fits and adm.slack == 0
    assert admission_key(adm, small) < (True, -4, 0, 0)


def test_larger_workload_preferred_among_fitting():
    g = from_classes(2, 6, "DDDDDD AAAAAA")
    a, b = _w(0, 2), _w(1, 4, arrival=3)
    w, _ = choose_admission(_ctx(g), [a, b], {0: 1, 1: 1}, PROPOSED)
    assert w is b


def test_exhausted_core_budget_keeps_workload_queued():
    g = from_classes(1, 5, "DADAD")
    w = _w(0, 3)
    assert choose_admission(_ctx(g), [w], {0: 0}, PROPOSED) is not None
    assert choose_admission(_ctx(g, c_a=1), [w], {0: 0}, PROPOSED) is None


def test_fifo_head_blocks_the_queue():
    g = from_classes(2, 3, "DDD AAA")
    fifo = ABLATIONS["C1"]
    assert choose_admission(_ctx(g), [_w(0, 4), _w(1, 1)], {0: 1, 1: 1}, fifo) is None
    online = choose_admission(_ctx(g), [_w(0, 4), _w(1, 1)], {0: 1, 1: 1}, PROPOSED)
    assert online[0].id == 1


def test_random_placement_is_seeded():
    g = from_classes(3, 6, "DDDDDD AAAAAA DDDDDD")
    pick = lambda s: choose_admission(_ctx(g, rng=np.random.default_rng(s)), [_w(0, 5)], {0: 1},
                                      POLICIES["random"])[1].cluster
    assert pick(3) == pick(3)


def test_idle_machine_falls_back_to_compact_when_random_cores_fail(monkeypatch):
    import tilemp.policies as pol

    def hopeless(*a, **k):
        raise pol.PlacementError("no route")

    monkeypatch.setattr(pol, "random_core", hopeless)
    g = from_classes(3, 6, "DDDDDD AAAAAA DDDDDD")
    w = _w(0, 5)
    rnd = POLICIES["random"]
    busy = _ctx(g, rng=np.random.default_rng(0))
    assert choose_admission(busy, [w], {0: 1}, rnd) is None
    idle = _ctx(g, rng=np.random.default_rng(0), idle=True)
    got, adm = choose_admission(idle, [w], {0: 1}, rnd)
    assert got is w
    compact = choose_admission(_ctx(g), [w], {0: 1}, ABLATIONS["C1"])[1]
    assert adm.cluster == compact.cluster and adm.A == compact.A


# -- switches and states ---------------------------------------------------------------

def test_policy_table():
    assert resolve_flags("proposed") == PolicyFlags()
    assert resolve_flags("naive").park is False
    assert resolve_flags("random").placement == "random"
    assert resolve_flags("proposed", "C0").placement == "random"
    assert resolve_flags("naive", "C3") == PolicyFlags()
    with pytest.raises(ValueError):
        resolve_flags("greedy")
    with pytest.raises(ValueError):
        resolve_flags("proposed", "C9")


def test_ablation_ladder_adds_one_mechanism_group_per_step():
    c0, c1, c2, c3 = (ABLATIONS[k] for k in ("C0", "C1", "C2", "C3"))
    assert c0.placement == "random" and c1.placement == "compact"
    assert c1.admission == c2.admission == "fifo" and c3.admission == "online"
    assert c1.arbitration == "greedy" and c2.arbitration == "hierarchy"


def test_legal_transitions():
    assert is_legal("Queue", "Ready")
    assert is_legal("Running", "Parked")
    assert not is_legal("Queue", "Running")
    assert not is_legal("Complete", "Ready")
    assert not is_legal("Parked", "Running")
