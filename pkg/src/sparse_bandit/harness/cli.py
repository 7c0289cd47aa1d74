"""Command line entry point: ``run``, ``diagnose`` and ``plot``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .experiment import build_diagnostics, curves_from_traces, read_traces, run_experiment, run_one
from .experiment import EpisodeKey, _dump_json
from .plot import render_plot

EXIT_OK, EXIT_CONFIG, EXIT_EPISODE, EXIT_IO = 0, 1, 2, 3


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("master_seed", "must be non-negative")
        cfg.master_seed = args.seed
    if getattr(args, "paper_scale", False):
        cfg = cfg.at_paper_scale()
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg.output_dir)
    result = run_experiment(cfg, out_dir=out, parallel=args.parallel)
    for name, entry in result.summary["configs"].items():
        print(f"{name}: final regret mean {entry['final_regret_mean']:.4g} "
              f"[{entry['final_regret_min']:.4g}, {entry['final_regret_max']:.4g}]")
    print(f"wrote {', '.join(str(p) for p in result.paths.values())}")
    if result.failures:
        for f in result.summary["failures"]:
            print(f"episode failed: {f}", file=sys.stderr)
        return EXIT_EPISODE
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    probe = run_one(cfg, EpisodeKey(0, 0, 0), keep_design=True)
    if probe.error:
        print(f"episode failed: {probe.error}", file=sys.stderr)
        return EXIT_EPISODE
    report = build_diagnostics(cfg, probe.trace.design, probe.support, monte_carlo=True).to_dict()
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "diagnostics.json").write_text(_dump_json(report))
    print(json.dumps({k: report[k] for k in ("lambda0", "exploration_low", "exploration_high",
                                              "re_constant_estimate", "regret_bound")}, indent=2))
    print(f"wrote {out / 'diagnostics.json'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        traces = read_traces(args.traces)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    render_plot(curves_from_traces(traces), args.out, title=Path(args.traces).stem)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparse-bandit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run seeded episodes and write traces, summary and plot")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (default: the config's output_dir)")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--parallel", type=int, default=1, help="worker processes")
    r.add_argument("--paper-scale", action="store_true", help="use the full d and k")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("diagnose", help="bounds and Monte-Carlo checks only")
    d.add_argument("--config", required=True)
    d.add_argument("--out")
    d.add_argument("--seed", type=int)
    d.add_argument("--paper-scale", action="store_true")
    d.set_defaults(func=cmd_diagnose)

    pl = sub.add_parser("plot", help="render a trace CSV as SVG")
    pl.add_argument("--traces", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "parallel", 1) < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
