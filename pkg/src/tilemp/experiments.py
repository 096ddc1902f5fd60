"""Experiment presets, seed sweeps and output files."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import csv
import io
import json
import math
import os
import traceback

import numpy as np

from . import metrics
from .config import SimConfig, dump_toml
from .engine import run_simulation

SCALING = ((20, 12, 100), (30, 18, 250), (40, 24, 400), (60, 36, 900))
MIX_NAMES = ("small", "medium", "big", "balanced")
WAIT_COUNTS = (25, 50, 75, 100)


def _policies(base):
    return [(p, replace(base, policy=p, ablation="")) for p in ("proposed", "naive", "random")]


def preset_runs(preset, base: SimConfig, seeds):
    """Expand a preset into ``[(label, cfg), ...]`` with every seed filled in."""
    if not seeds:
        raise ValueError("at least one seed is required")
    if preset == "rq1":
        grid = _policies(replace(base, mix="balanced"))
    elif preset == "rq2-ablation":
        grid = [(c, replace(base, mix="balanced", ablation=c)) for c in ("C0", "C1", "C2", "C3")]
    elif preset == "rq2-scaling":
        grid = []
        for rows, cols, n in SCALING:
            sized = replace(base, rows=rows, cols=cols, count=n, mix="balanced")
            grid += [(f"{rows}x{cols}/{p}", c) for p, c in _policies(sized)]
    elif preset == "rq3":
        grid = [(m, replace(base, mix=m)) for m in MIX_NAMES]
    elif preset == "rq3-waits":
        grid = [(f"n{n}", replace(base, mix="balanced", count=n)) for n in WAIT_COUNTS]
    elif preset == "rq4":
        grid = [(m, replace(base, mode=m)) for m in ("ports", "cultivation")]
    elif preset == "custom":
        grid = [(base.label(), base)]
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return [(label, replace(cfg, seed=int(s)).validate()) for label, cfg in grid for s in seeds]


PRESETS = ("rq1", "rq2-ablation", "rq2-scaling", "rq3", "rq3-waits", "rq4", "custom")


# -- files --------------------------------------------------------------------------------

SEGMENT_FIELDS = ("t0", "t1", "free_total", "cmax", "running", "parked", "wait_primary",
                  "wait_secondary", "ready", "queue")


def trace_csv(trace):
    """Run-length trace: one row per constant stretch ``[t0, t1)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SEGMENT_FIELDS)
    for s in trace.segments:
        w.writerow((s.t0, s.t1, s.free_total, f"{s.cmax_frac:.6f}", s.n_running, s.n_parked,
                    s.n_waitp, s.n_waits, s.n_ready, s.n_queue))
    return buf.getvalue()


def workloads_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("id", "qubits", "columns", "size_class", "arrival", "admitted", "completed",
                "solo", "ref_solo", "magic"))
    for r in trace.records:
        w.writerow((r.id, r.qubits, r.columns, r.size_class, r.arrival, r.admitted, r.completed,
                    r.solo, r.ref_solo, r.magic_consumed))
    return buf.getvalue()


def run_summary(label, cfg, trace):
    rep = metrics.report(trace)
    problems = metrics.audit(trace)
    return {
        "label": label, "seed": cfg.seed, "ok": True,
        "eta": rep.eta, "partial": rep.partial, "incomplete": rep.incomplete,
        "makespan": rep.makespan, "mean_slowdown": rep.mean_slowdown,
        "mean_slowdown_arrival": rep.mean_slowdown_arrival, "waits": rep.waits,
        "cmax_mean": rep.cmax_mean, "cmax_min": rep.cmax_min,
        "audit": problems, "solo_witness": len(trace.audit.get("solo_witness", ())),
        "config": cfg.to_dict(),
    }


def _run_dir(out, label, seed):
    return os.path.join(out, label.replace("/", "_"), f"seed{seed}")


def write_run(out_dir, cfg, trace, summary):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.csv"), "w") as fh:
        fh.write(trace_csv(trace))
    with open(os.path.join(out_dir, "workloads.csv"), "w") as fh:
        fh.write(workloads_csv(trace))
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.toml"), "w") as fh:
        fh.write(dump_toml(cfg))


def run_one(label, cfg, out=None):
    """Run one configuration; failures come back as a summary with ``ok = False``."""
    try:
        trace = run_simulation(cfg)
        summary = run_summary(label, cfg, trace)
        if out:
            write_run(_run_dir(out, label, cfg.seed), cfg, trace, summary)
        return summary
    except Exception as exc:  # a sweep keeps going past a broken run
        return {"label": label, "seed": cfg.seed, "ok": False,
                "error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc(),
                "config": cfg.to_dict()}


def _star(args):
    return run_one(*args)


def aggregate(summaries):
    """Mean and standard deviation per label, in first-seen label order."""
    groups = {}
    for s in summaries:
        groups.setdefault(s["label"], []).append(s)
    out = {}
    for label, runs in groups.items():
        good = [r for r in runs if r["ok"]]
        entry = {"runs": len(runs), "failed": len(runs) - len(good), "seeds": [r["seed"] for r in runs]}
        if good:
            eta = np.array([r["eta"] for r in good])
            S = np.array([r["mean_slowdown"] for r in good])
            entry.update(
                eta_mean=float(eta.mean()), eta_std=float(eta.std()),
                slowdown_mean=float(S.mean()), slowdown_std=float(S.std()),
                slowdown_arrival_mean=float(np.mean([r["mean_slowdown_arrival"] for r in good])),
                cmax_mean=float(np.mean([r["cmax_mean"] for r in good])),
                waits={k: float(np.mean([r["waits"][k] for r in good])) for k in good[0]["waits"]},
            )
        out[label] = entry
    return out


def run_experiment(preset, base: SimConfig, seeds, jobs=1, out=None):
    """Run every (config, seed) pair of a preset; returns ``(summaries, aggregate)``."""
    runs = preset_runs(preset, base, seeds)
    args = [(label, cfg, out) for label, cfg in runs]
    if jobs and jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            summaries = list(ex.map(_star, args))
    else:
        summaries = [_star(a) for a in args]
    agg = aggregate(summaries)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "aggregate.json"), "w") as fh:
            json.dump({"preset": preset, "seeds": list(seeds), "groups": agg}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_tables(out, preset, summaries)
    return summaries, agg


def _write_tables(out, preset, summaries):
    # one tidy row per run, ready for any plotting tool
    with open(os.path.join(out, "runs.csv"), "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("preset", "label", "seed", "ok", "eta", "mean_slowdown", "mean_slowdown_arrival",
                    "queue", "parked", "wait_primary", "wait_secondary", "cmax_mean"))
        for s in summaries:
            if not s["ok"]:
                w.writerow((preset, s["label"], s["seed"], 0) + ("",) * 8)
                continue
            wt = s["waits"]
            w.writerow((preset, s["label"], s["seed"], 1, _f(s["eta"]), _f(s["mean_slowdown"]),
                        _f(s["mean_slowdown_arrival"]), _f(wt["Queue"]), _f(wt["Parked"]),
                        _f(wt["WaitPrimary"]), _f(wt["WaitSecondary"]), _f(s["cmax_mean"])))


def _f(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"
