"""Synthetic Clifford+T workloads, workload mixes and the phase model.

Randomness comes from ``numpy.random.Generator`` with the PCG64 bit generator,
so a given seed reproduces the same workload on every platform.
"""
from dataclasses import dataclass, field, replace
import json
import math

import numpy as np

AXES = ("X", "Y", "Z")
SIZE_CLASSES = {"small": (10, 20), "medium": (40, 60), "big": (60, 100)}
CLASS_ORDER = ("small", "medium", "big")
MIXES = ("small", "medium", "big", "balanced")


@dataclass(frozen=True)
class Workload:
    id: int
    qubits: int
    columns: int
    t_gates: tuple          # per column: tuple of (qubit, axis) pairs
    phase_bits: tuple       # one Bernoulli(0.5) bit per column
    arrival: int = 0
    size_class: str = ""

    @property
    def t_count(self):
        return sum(len(col) for col in self.t_gates)

    @property
    def t_depth(self):
        return sum(1 for col in self.t_gates if col)

    def column_t_counts(self):
        return np.fromiter((len(col) for col in self.t_gates), dtype=np.int64, count=self.columns)

    def with_arrival(self, t):
        return replace(self, arrival=int(t))

    def with_id(self, wid):
        return replace(self, id=int(wid))


@dataclass(frozen=True)
class PhaseDescriptor:
    index: int
    r_prim: int
    d_sec: int
    mu: int
    duration: int
    blocking: int


@dataclass(frozen=True)
class PhaseModel:
    """Column-per-phase execution model."""
    phase_duration: int = 1
    t_layer_duration: int = 3
    routing_slack: int = 1


@dataclass(frozen=True)
class GeneratorSpec:
    columns: tuple = (10, 1000)
    t_depth: tuple = (10, 1000)
    t_density: tuple = (0.05, 0.30)
    size_classes: dict = field(default_factory=lambda: dict(SIZE_CLASSES))
    named_fraction: float = 0.8
    max_tries: int = 64


@dataclass(frozen=True)
class WorkloadMix:
    category: str
    count: int
    seed: int


def generate_workload(q, c, t_budget, seed, wid=0, arrival=0, size_class=""):
    """Scatter ``t_budget`` T-gates uniformly over distinct (qubit, column) cells."""
    if q < 1 or c < 1:
        raise ValueError("qubits and columns must be positive")
    if t_budget < 0 or t_budget > q * c:
        raise ValueError(f"T budget {t_budget} outside [0, {q * c}]")
    rng = np.random.default_rng(seed)
    cells = rng.choice(q * c, size=t_budget, replace=False) if t_budget else np.zeros(0, dtype=np.int64)
    axes = rng.integers(0, 3, size=t_budget)
    bits = rng.integers(0, 2, size=c)
    per_col = [[] for _ in range(c)]
    for cell, ax in zip(cells.tolist(), axes.tolist()):
        col, qb = divmod(cell, q)
        per_col[col].append((qb, AXES[ax]))
    t_gates = tuple(tuple(sorted(col)) for col in per_col)
    return Workload(id=wid, qubits=q, columns=c, t_gates=t_gates,
                    phase_bits=tuple(int(b) for b in bits), arrival=arrival, size_class=size_class)


def _draw_workload(rng, cls, gen, wid):
    lo, hi = gen.size_classes[cls]
    q = int(rng.integers(lo, hi + 1))
    for _ in range(gen.max_tries):
        c = int(rng.integers(gen.columns[0], gen.columns[1] + 1))
        rho = float(rng.uniform(*gen.t_density))
        budget = min(q * c, int(round(rho * q * c)))
        w = generate_workload(q, c, budget, int(rng.integers(2**63)), wid=wid, size_class=cls)
        if gen.t_depth[0] <= w.t_depth <= gen.t_depth[1]:
            return w
    raise RuntimeError("could not realise the requested T-depth range")


def mix_classes(category, count, rng, named_fraction=0.8):
    """Size class of every workload in a mix, in draw order."""
    category = category.lower()
    if category not in MIXES:
        raise ValueError(f"unknown mix {category!r}")
    if count < 1:
        raise ValueError("mix count must be at least 1")
    if category == "balanced":
        return [CLASS_ORDER[i % 3] for i in range(count)]
    n_named = math.ceil(named_fraction * count)
    rest = [CLASS_ORDER[int(k)] for k in rng.integers(0, 3, size=count - n_named)]
    return [category] * n_named + rest


def sample_mix(mix: WorkloadMix, gen: GeneratorSpec = None):
    """Draw the workloads of a mix; arrival times are left at 0 for the engine to set."""
    gen = gen or GeneratorSpec()
    rng = np.random.default_rng(mix.seed)
    classes = mix_classes(mix.category, mix.count, rng, gen.named_fraction)
    order = rng.permutation(len(classes))
    return [_draw_workload(rng, classes[k], gen, wid=i) for i, k in enumerate(order)]


def describe_column(index, mu, q, model: PhaseModel = PhaseModel()):
    r_prim = min(mu + model.routing_slack, q)
    return PhaseDescriptor(
        index=index,
        r_prim=r_prim,
        d_sec=max(0, mu - r_prim),
        mu=mu,
        duration=model.t_layer_duration if mu > 0 else model.phase_duration,
        blocking=1 if mu > 0 else 0,
    )


def phase_sequence(w: Workload, model: PhaseModel = PhaseModel()):
    return [describe_column(k, len(col), w.qubits, model) for k, col in enumerate(w.t_gates)]


def phase_arrays(w: Workload, model: PhaseModel = PhaseModel()):
    """Phase descriptors as parallel int arrays (mu, r_prim, d_sec, duration, blocking)."""
    mu = w.column_t_counts()
    r_prim = np.minimum(mu + model.routing_slack, w.qubits)
    d_sec = np.maximum(0, mu - r_prim)
    dur = np.where(mu > 0, model.t_layer_duration, model.phase_duration)
    return mu, r_prim, d_sec, dur, (mu > 0).astype(np.int64)


# -- JSON -------------------------------------------------------------------

def workload_to_dict(w: Workload):
    return {
        "id": w.id,
        "qubits": w.qubits,
        "columns": w.columns,
        "tGates": [[list(g) for g in col] for col in w.t_gates],
        "columnPhaseBits": list(w.phase_bits),
        "arrivalTime": w.arrival,
        "sizeClass": w.size_class,
    }


def workload_from_dict(d):
    t_gates = tuple(tuple(sorted((int(q), str(a)) for q, a in col)) for col in d["tGates"])
    w = Workload(id=int(d["id"]), qubits=int(d["qubits"]), columns=int(d["columns"]),
                 t_gates=t_gates, phase_bits=tuple(int(b) for b in d["columnPhaseBits"]),
                 arrival=int(d.get("arrivalTime", 0)), size_class=d.get("sizeClass", ""))
    validate_workload(w)
    return w


def validate_workload(w: Workload):
    if len(w.t_gates) != w.columns or len(w.phase_bits) != w.columns:
        raise ValueError(f"workload {w.id}: column count mismatch")
    for k, col in enumerate(w.t_gates):
        qs = [q for q, _ in col]
        if len(set(qs)) != len(qs):
            raise ValueError(f"workload {w.id}: two T-gates on one qubit in column {k}")
        if any(q < 0 or q >= w.qubits for q in qs):
            raise ValueError(f"workload {w.id}: qubit index out of range in column {k}")
        if any(a not in AXES for _, a in col):
            raise ValueError(f"workload {w.id}: bad rotation axis in column {k}")


def save_workloads(path, workloads):
    with open(path, "w") as fh:
        json.dump([workload_to_dict(w) for w in workloads], fh, separators=(",", ":"))


def load_workloads(path):
    with open(path) as fh:
        return [workload_from_dict(d) for d in json.load(fh)]
