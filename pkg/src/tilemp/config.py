"""Simulation configuration: defaults, TOML files and ``key=value`` overrides."""
from dataclasses import asdict, dataclass, fields, replace
import json

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .floorplan import LayoutSpec
from .workload import GeneratorSpec, PhaseModel

ALIASES = {"t_init_cultivation": "cultivation_latency"}


@dataclass(frozen=True)
class SimConfig:
    # floorplan
    rows: int = 20
    cols: int = 12
    data_density: float = 0.5
    layout_pattern: str = "bands"
    num_ports: int = 50
    port_rule: str = "boundary"
    # workloads
    mix: str = "balanced"
    count: int = 100
    workload_file: str = ""
    t_density: tuple = (0.05, 0.30)
    columns: tuple = (10, 1000)
    t_depth: tuple = (10, 1000)
    # execution model
    phase_duration: int = 1
    t_layer_duration: int = 3
    routing_slack: int = 1
    # policy
    policy: str = "proposed"
    ablation: str = ""
    core_reserve_frac: float = 0.25
    starvation_age: int = 200
    t_prep: int = 11
    t_init_port: int = 11
    port_warmup: str = "boot"      # boot: every port warms from cycle 0; first_use: on its first request
    # magic-state source
    mode: str = "ports"
    cultivation_latency: int = 26
    p_fail: float = 0.0
    # arrivals and run control
    arrival: str = "online"
    arrival_span_frac: float = 0.1
    arrival_schedule: tuple = ()
    seed: int = 0
    horizon: int = 10_000_000

    def layout(self):
        return LayoutSpec(self.rows, self.cols, self.data_density, self.layout_pattern,
                          self.num_ports, self.port_rule, self.seed)

    def generator(self):
        return GeneratorSpec(columns=tuple(self.columns), t_depth=tuple(self.t_depth),
                             t_density=tuple(self.t_density))

    def phase_model(self):
        return PhaseModel(self.phase_duration, self.t_layer_duration, self.routing_slack)

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be at least 1")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.mode not in ("ports", "cultivation"):
            raise ValueError(f"mode must be ports or cultivation, got {self.mode!r}")
        if self.port_warmup not in ("boot", "first_use"):
            raise ValueError(f"port_warmup must be boot or first_use, got {self.port_warmup!r}")
        if self.arrival not in ("online", "offline", "schedule"):
            raise ValueError(f"unknown arrival model {self.arrival!r}")
        if self.policy not in ("proposed", "naive", "random"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.ablation and self.ablation not in ("C0", "C1", "C2", "C3"):
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if not 0.0 <= self.core_reserve_frac <= 1.0:
            raise ValueError("core_reserve_frac must be in [0, 1]")
        if not 0.0 <= self.p_fail < 1.0:
            raise ValueError("p_fail must be in [0, 1)")
        if self.phase_duration < 1 or self.t_layer_duration < 1:
            raise ValueError("phase durations must be at least 1 cycle")
        if self.arrival == "schedule" and not self.arrival_schedule:
            raise ValueError("arrival = schedule needs arrival_schedule")
        return self

    def to_dict(self):
        return asdict(self)

    def label(self):
        return self.ablation or self.policy


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _coerce(name, value):
    default = _FIELDS[name].default
    if isinstance(default, bool):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        if isinstance(value, str):
            value = json.loads(value if value.strip().startswith("[") else f"[{value}]")
        return tuple(value)
    return str(value)


def with_overrides(cfg: SimConfig, items):
    """Apply ``{key: value}`` overrides; keys may be dotted (``section.key``)."""
    changes = {}
    for key, value in items.items():
        name = key.split(".")[-1]
        name = ALIASES.get(name, name)
        if name not in _FIELDS:
            raise KeyError(f"unknown config key {key!r}")
        changes[name] = _coerce(name, value)
    return replace(cfg, **changes).validate()


def parse_set(pairs):
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ValueError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _flatten(d, out=None):
    out = {} if out is None else out
    for k, v in d.items():
        if isinstance(v, dict):
            _flatten(v, out)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    cfg = SimConfig()
    if path:
        with open(path, "rb") as fh:
            cfg = with_overrides(cfg, _flatten(tomllib.load(fh)))
    if overrides:
        cfg = with_overrides(cfg, overrides)
    return cfg.validate()


def dump_toml(cfg: SimConfig):
    """Render a config with every key explicit, grouped into sections."""
    sections = {
        "floorplan": ["rows", "cols", "data_density", "layout_pattern", "num_ports", "port_rule"],
        "workload": ["mix", "count", "workload_file", "t_density", "columns", "t_depth"],
        "execution": ["phase_duration", "t_layer_duration", "routing_slack"],
        "policy": ["policy", "ablation", "core_reserve_frac", "starvation_age", "t_prep", "t_init_port", "port_warmup"],
        "magic": ["mode", "cultivation_latency", "p_fail"],
        "run": ["arrival", "arrival_span_frac", "arrival_schedule", "seed", "horizon"],
    }
    d = cfg.to_dict()
    lines = []
    for sec, keys in sections.items():
        lines.append(f"[{sec}]")
        for k in keys:
            lines.append(f"{k} = {json.dumps(list(d[k]) if isinstance(d[k], tuple) else d[k])}")
        lines.append("")
    return "\n".join(lines)
