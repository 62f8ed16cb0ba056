"""Command-line entry point.

The output directory is ``--output-dir`` if given, else
``$SEMRELAY_OUTPUT_DIR``, else ``./semrelay_out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from .config import load_config
from .errors import SemrelayError
from .experiment import (
    STRATEGIES,
    actual_motion,
    oracle,
    plan,
    write_bundle,
    write_replay,
    write_sweep,
)
from .experiment import sweep as run_sweep
from .replay import replay

ENV_OUTPUT = "SEMRELAY_OUTPUT_DIR"


def _seed_range(text: str) -> range:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from exc
    if hi < lo:
        raise argparse.ArgumentTypeError("empty seed range")
    return range(lo, hi + 1)


def _strategies(text: str) -> tuple:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in names if s not in STRATEGIES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"strategies must be from {','.join(STRATEGIES)}")
    return names


def _output_dir(args) -> Path:
    return Path(args.output_dir or os.environ.get(ENV_OUTPUT) or "semrelay_out")


def _load(args):
    cfg = load_config(args.config)
    kw = {}
    if getattr(args, "iterations", None) is not None:
        kw["iterations"] = args.iterations
    if getattr(args, "search_seed", None) is not None:
        kw["seed"] = args.search_seed
    if kw:
        from dataclasses import replace

        cfg = cfg.with_overrides(search=replace(cfg.search, **kw))
    return cfg


def cmd_plan(args) -> int:
    result = plan(_load(args))
    out = _output_dir(args)
    write_bundle(result, out, args.compare)
    sys.stdout.write((out / "summary.txt").read_text())
    return 0


def cmd_replay(args) -> int:
    result = plan(_load(args))
    motion = actual_motion(result, seed=args.seed, trace_path=args.trace, sigma=args.sigma)
    report = replay(result.problem, result.assignment(args.strategy), motion, result.config.replay_step)
    tag = args.strategy + ("_trace" if args.trace else f"_seed{args.seed}")
    path = write_replay(report, _output_dir(args), tag)
    print(f"delivered {len(report.delivered)}/{result.sr.n} units, accuracy {report.accuracy:.4f}"
          f" of {report.planned_accuracy:.4f}")
    print(f"P_V2I = {report.p_v2i:.6f} J, P_V2V = {report.p_v2v:.6f} J, completion {report.completion_time:.3f} s")
    if report.undelivered:
        print("undelivered: " + ", ".join(report.undelivered))
    print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    result = plan(_load(args))
    cfg = result.config
    sigma = args.sigma if args.sigma is not None else (cfg.perturbation.sigma or 0.5)
    runs = run_sweep(result, args.seeds, sigma, args.strategy, args.jobs)
    path = write_sweep(result, runs, _output_dir(args), args.strategy)
    full = sum(1 for _, r in runs if not r.undelivered)
    print(f"{len(runs)} seeds at sigma {sigma:g} m/s: {full} delivered every unit; wrote {path}")
    return 0


def cmd_oracle(args) -> int:
    result = plan(_load(args))
    report = oracle(result)
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report, indent=2))
    return 0


def cmd_repro(args) -> int:
    from .repro import run_all

    checks = run_all(quick=args.quick, out=sys.stdout)
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semrelay", description="Semantic store-carry-forward relay planner")
    p.add_argument("--output-dir", help=f"report directory (overrides ${ENV_OUTPUT})")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="experiment config (INI)")
        sp.add_argument("--iterations", type=int, help="override search iterations")
        sp.add_argument("--search-seed", type=int, help="override the search seed")
        sp.add_argument("--output-dir", default=argparse.SUPPRESS, help="report directory")
        return sp

    sp = with_config("plan", "predict, size throughput and assign units")
    sp.add_argument("--compare", type=_strategies, default=STRATEGIES, help="e.g. baseline,mmtsa")
    sp.set_defaults(func=cmd_plan)

    sp = with_config("replay", "execute the plan against perturbed or traced motion")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--seed", type=int, default=0, help="perturbation seed")
    g.add_argument("--trace", type=Path, help="actual mobility trace CSV")
    sp.add_argument("--sigma", type=float, help="speed perturbation std (m/s)")
    sp.add_argument("--strategy", choices=STRATEGIES, default="mmtsa")
    sp.set_defaults(func=cmd_replay)

    sp = with_config("sweep", "replay over a range of perturbation seeds")
    sp.add_argument("--seeds", type=_seed_range, required=True, help="inclusive range A..B")
    sp.add_argument("--sigma", type=float, help="speed perturbation std (m/s)")
    sp.add_argument("--strategy", choices=STRATEGIES, default="mmtsa")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.set_defaults(func=cmd_sweep)

    sp = with_config("oracle", "exhaustive optimum for small instances")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("repro-paper", help="run the bundled acceptance checks")
    sp.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    sp.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            return args.func(args)
    except (SemrelayError, OSError) as exc:
        print(f"semrelay: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
