"""Post-processing of simulation traces: throughput, slowdown, fragmentation, waits."""
from dataclasses import asdict, dataclass, field
import json

import numpy as np

from .policies import WorkloadState as WS

WAIT_STATES = (WS.QUEUE.value, WS.PARKED.value, WS.WAIT_PRIMARY.value, WS.WAIT_SECONDARY.value)


class IncompleteRunError(ValueError):
    """Raised when a metric needs every workload to have completed."""

    def __init__(self, incomplete):
        self.incomplete = list(incomplete)
        super().__init__(f"{len(self.incomplete)} workloads did not complete: {self.incomplete[:10]}")


def _solo_of(trace, solo):
    if solo is None:
        return {r.id: r.ref_solo for r in trace.records}
    return dict(solo)


def makespan(trace):
    """Cycles from the first arrival to the last completion."""
    recs = trace.records
    if not recs:
        return 0
    start = min(r.arrival for r in recs)
    return max(r.completed for r in recs) - start


def normalized_throughput(trace, solo=None):
    """Sum of standalone times over the concurrent makespan.

    ``solo`` maps workload id to its standalone time and defaults to each
    record's ``ref_solo``.
    """
    if trace.incomplete:
        raise IncompleteRunError(trace.incomplete)
    solo = _solo_of(trace, solo)
    T = makespan(trace)
    if T <= 0:
        raise ValueError("empty run")
    return sum(solo[r.id] for r in trace.records) / T


def partial_throughput(trace, solo=None):
    """``(eta, incomplete ids)`` over the workloads that did finish, up to the last recorded cycle."""
    solo = _solo_of(trace, solo)
    done = [r for r in trace.records if r.completed >= 0]
    end = trace.segments[-1].t1 if trace.segments else 0
    start = min((r.arrival for r in trace.records), default=0)
    T = end - start
    eta = sum(solo[r.id] for r in done) / T if T > 0 else 0.0
    return eta, list(trace.incomplete)


def throughput_from_segments(trace, solo=None):
    """The same ratio, with the makespan taken from the segment stream instead of the records."""
    if trace.incomplete:
        raise IncompleteRunError(trace.incomplete)
    solo = _solo_of(trace, solo)
    segs = trace.segments
    # the last segment closes on the cycle the final workload is logged complete
    T = segs[-1].t1 - segs[0].t0 if segs else 0
    return sum(solo.values()) / T


def slowdown(trace, solo=None, basis="admission"):
    """Per-workload ``shared time / solo time``.

    ``basis`` picks where the shared time starts: ``admission`` (placement
    onto the floorplan) or ``arrival`` (submission, so queueing counts).
    ``solo`` defaults to each record's pinned-placement ``solo``.
    """
    if basis not in ("admission", "arrival"):
        raise ValueError(f"basis must be admission or arrival, got {basis!r}")
    solo = {r.id: r.solo for r in trace.records} if solo is None else dict(solo)
    out = {}
    for r in trace.records:
        if r.completed < 0:
            continue
        start = r.admitted if basis == "admission" else r.arrival
        out[r.id] = (r.completed - start) / solo[r.id]
    return out


def cmax(g, free_mask):
    """Largest free component as a fraction of all free tiles (1.0 when nothing is free)."""
    from .floorplan import free_components_mask
    free_mask = np.asarray(free_mask, dtype=np.bool_) & ~g.is_port
    total = int(free_mask.sum())
    if total == 0:
        return 1.0
    labels, k = free_components_mask(g, free_mask)
    return float(np.bincount(labels[labels >= 0], minlength=k).max() / total)


def cmax_series(trace):
    """``(t0, t1, C_max)`` for every constant stretch of the run."""
    return [(s.t0, s.t1, s.cmax_frac) for s in trace.segments]


def lifetime(rec):
    return rec.completed - rec.arrival


def wait_breakdown(trace):
    """Mean share of each workload's lifetime spent in every non-running state."""
    per = []
    for r in trace.records:
        if r.completed < 0:
            continue
        life = lifetime(r)
        d = r.dwell()
        per.append({s: (d.get(s, 0) / life if life else 0.0) for s in WAIT_STATES + (WS.READY.value,)})
    if not per:
        return {s: 0.0 for s in WAIT_STATES}
    return {s: float(np.mean([p[s] for p in per])) for s in per[0]}


def audit(trace):
    """Every bookkeeping check on a finished trace; returns a list of problems (empty if clean)."""
    problems = []
    a = trace.audit
    if a.get("double_owner"):
        problems.append(f"double ownership in {a['double_owner']} updates")
    if a.get("illegal"):
        problems.append(f"illegal transitions: {a['illegal'][:5]}")
    if a.get("conservation"):
        problems.append(f"tile conservation broken {a['conservation']} times")
    for r in trace.records:
        if r.completed < 0:
            continue
        if sum(r.dwell().values()) != lifetime(r):
            problems.append(f"workload {r.id}: dwell times do not add up to its lifetime")
        if r.solo and (r.completed - r.admitted) < r.solo:
            problems.append(f"workload {r.id} finished faster than alone")
    for s in trace.segments:
        if not 0.0 <= s.cmax_frac <= 1.0:
            problems.append(f"C_max out of range at {s.t0}")
            break
    for prev, nxt in zip(trace.segments, trace.segments[1:]):
        if prev.t1 != nxt.t0:
            problems.append(f"segment gap at {prev.t1}")
            break
    return problems


@dataclass
class MetricsReport:
    eta: float
    partial: bool
    incomplete: list
    makespan: int
    mean_slowdown: float
    mean_slowdown_arrival: float
    waits: dict
    cmax_mean: float
    cmax_min: float
    slowdowns: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["slowdowns"] = {str(k): v for k, v in self.slowdowns.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def report(trace):
    if trace.incomplete:
        eta, incomplete = partial_throughput(trace)
        partial = True
        T = (trace.segments[-1].t1 if trace.segments else 0)
    elif not trace.records:
        eta, incomplete, partial, T = float("nan"), [], False, 0
    else:
        eta, incomplete, partial = normalized_throughput(trace), [], False
        T = makespan(trace)
    S = slowdown(trace)
    S_arr = slowdown(trace, basis="arrival")
    w = np.array([s.t1 - s.t0 for s in trace.segments], dtype=np.float64)
    c = np.array([s.cmax_frac for s in trace.segments])
    return MetricsReport(
        eta=float(eta), partial=partial, incomplete=incomplete, makespan=int(T),
        mean_slowdown=float(np.mean(list(S.values()))) if S else float("nan"),
        mean_slowdown_arrival=float(np.mean(list(S_arr.values()))) if S_arr else float("nan"),
        waits=wait_breakdown(trace),
        cmax_mean=float(np.sum(w * c) / w.sum()) if w.size else 1.0,
        cmax_min=float(c.min()) if c.size else 1.0,
        slowdowns=S, config=dict(trace.config),
    )
