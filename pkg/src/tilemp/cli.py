"""Command-line front end: ``simulate``, ``sweep``, ``gen-workloads`` and ``config``."""
import argparse
import json
import os
import sys

from .config import dump_toml, load_config, parse_set
from .engine import run_simulation
from .experiments import PRESETS, run_experiment, run_summary, write_run
from .workload import GeneratorSpec, MIXES, WorkloadMix, sample_mix, save_workloads


def _seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser():
    p = argparse.ArgumentParser(prog="tilemp", description="Concurrent workload scheduling on a tile floorplan.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one configuration")
    s.add_argument("--config", help="TOML configuration file")
    s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="directory for trace.csv, workloads.csv and summary.json")

    w = sub.add_parser("sweep", help="run a preset over several seeds")
    w.add_argument("--preset", required=True, choices=PRESETS)
    w.add_argument("--config", help="base TOML configuration file")
    w.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    w.add_argument("--seeds", type=_seeds, default=[0, 1, 2, 3, 4])
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", help="output directory")

    g = sub.add_parser("gen-workloads", help="write a synthetic workload mix as JSON")
    g.add_argument("--mix", required=True, choices=MIXES)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    c = sub.add_parser("config", help="print the fully resolved configuration as TOML")
    c.add_argument("--config")
    c.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return p


def _resolve(args):
    overrides = parse_set(args.overrides)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def cmd_simulate(args):
    cfg = _resolve(args)
    trace = run_simulation(cfg)
    summary = run_summary(cfg.label(), cfg, trace)
    if args.out:
        write_run(args.out, cfg, trace, summary)
    brief = {k: summary[k] for k in ("label", "seed", "eta", "partial", "makespan", "mean_slowdown",
                                     "mean_slowdown_arrival", "waits", "cmax_mean", "audit")}
    print(json.dumps(brief, indent=2, sort_keys=True))
    return 0


def cmd_sweep(args):
    base = load_config(args.config, parse_set(args.overrides))
    summaries, agg = run_experiment(args.preset, base, args.seeds, jobs=args.jobs, out=args.out)
    for label, e in agg.items():
        if "eta_mean" in e:
            print(f"{label:>24}  eta {e['eta_mean']:.3f} ± {e['eta_std']:.3f}  "
                  f"S {e['slowdown_mean']:.3f}  runs {e['runs']}  failed {e['failed']}")
        else:
            print(f"{label:>24}  all {e['runs']} runs failed")
    failed = [s for s in summaries if not s["ok"]]
    for s in failed:
        print(json.dumps({"failed": s["label"], "seed": s["seed"], "error": s["error"]}), file=sys.stderr)
    return 1 if failed else 0


def cmd_gen(args):
    if args.count < 0:
        raise ValueError("count must be non-negative")
    ws = sample_mix(WorkloadMix(args.mix, args.count, args.seed), GeneratorSpec())
    d = os.path.dirname(args.out)
    if d:
        os.makedirs(d, exist_ok=True)
    save_workloads(args.out, ws)
    print(f"wrote {len(ws)} workloads to {args.out}")
    return 0


def cmd_config(args):
    sys.stdout.write(dump_toml(load_config(args.config, parse_set(args.overrides))))
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "gen-workloads": cmd_gen, "config": cmd_config}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(json.dumps({"error": type(exc).__name__, "message": msg}), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
