"""Command-line front end: ``evacsim {validate,gen-layout,run,sweep}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import harness
from .engine import TRACE_COLUMNS, run
from .errors import ConfigError, EvacSimError, InfeasibleLayout, InsufficientSamples, ParseError, ValidationError
from .graph import validate
from .layout import generate_layout
from .scenario import PLACEMENT_ALIASES, SimConfig, load_scenario, scenario_document

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONFIG = 3
EXIT_IO = 4

PLACEMENT_CHOICES = ("all", "cabins", "restaurant", "split")


def _pods(text: str) -> list[float]:
    try:
        pods = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid pod list {text!r}") from None
    if not pods:
        raise argparse.ArgumentTypeError("pod list is empty")
    return pods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evacsim", description="Ship evacuation simulator with information lag.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("gen-layout", help="write a synthetic ship layout as a scenario file")
    p.add_argument("--decks", type=int, default=3)
    p.add_argument("--stairs", type=int, default=5)
    p.add_argument("--target-nodes", type=int, default=346)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, help_text in (("run", "simulate one PoD point"), ("sweep", "sweep PoD values")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True)
        if name == "run":
            p.add_argument("--pod", type=float, required=True)
            p.add_argument("--runs", type=int, default=1)
        else:
            p.add_argument("--pods", type=_pods, default=list(harness.DEFAULT_PODS))
            p.add_argument("--runs", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--placement", choices=PLACEMENT_CHOICES)
        p.add_argument("--passengers", type=int)
        p.add_argument("--out", required=True)
        if name == "run":
            p.add_argument("--trace", action="store_true", help="write per-run event traces")
    return parser


def _configure(args) -> tuple:
    graph, config = load_scenario(args.scenario)
    changes = {}
    if args.placement is not None:
        changes["placement"] = PLACEMENT_ALIASES.get(args.placement, args.placement)
    if args.passengers is not None:
        changes["passengers"] = args.passengers
    if changes:
        config = config.replace(**changes)
    return graph, config


def cmd_validate(args) -> int:
    graph, _ = load_scenario(args.scenario)
    problems = validate(graph)
    if problems:
        for line in problems:
            print(line, file=sys.stderr)
        return EXIT_VALIDATION
    counts = graph.counts()
    print(f"ok: {counts['nodes']} nodes, {counts['passageway']} passageways, {counts['staircase']} staircases")
    return EXIT_OK


def cmd_gen_layout(args) -> int:
    graph = generate_layout(args.decks, None, args.stairs, args.seed, target_nodes=args.target_nodes)
    doc = scenario_document(graph, SimConfig(), name=f"synthetic-{args.decks}d-{args.stairs}s", seed=args.seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    counts = graph.counts()
    print(f"wrote {out}: {counts['nodes']} nodes, {counts['passageway']} passageways, {counts['staircase']} staircases")
    return EXIT_OK


def cmd_run(args) -> int:
    graph, config = _configure(args)
    if args.runs < 1:
        raise ConfigError("--runs must be >= 1")
    if not 0.0 <= args.pod <= 1.0:
        raise ConfigError(f"--pod must lie in [0, 1], got {args.pod}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = config.with_pod(args.pod).replace(trace=args.trace)
    if args.trace:
        (out / "traces").mkdir(exist_ok=True)
        summaries = []
        for i in range(args.runs):
            seed = args.seed + i
            res = run(graph, config, seed)
            with (out / "traces" / f"run_{seed}.csv").open("w", newline="", encoding="utf-8") as fh:
                fh.write(",".join(TRACE_COLUMNS) + "\n")
                fh.writelines(line + "\n" for line in res.trace)
            summaries.append(harness.summarize(res, seed))
        point = harness.PointResult(args.pod, summaries)
    else:
        point = harness.run_point(graph, config, args.pod, args.runs, args.seed)
    harness.export_runs({args.pod: point}, out / "runs.csv")
    summary = {"pod": args.pod, "runs": args.runs, "base_seed": args.seed, "placement": config.placement}
    if args.runs >= 2:
        try:
            agg = harness.aggregate(point.means)
            summary.update(mean_s=agg.mean, std_s=agg.std, ci_lo_s=agg.ci_lo, ci_hi_s=agg.ci_hi)
        except InsufficientSamples:
            pass
    elif point.runs:
        summary["mean_s"] = point.runs[0].mean_s
    for key in ("evacuated", "deadline_missed", "casualties", "trapped"):
        summary[key] = sum(getattr(r, key) for r in point.runs)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args) -> int:
    graph, config = _configure(args)
    table = harness.sweep(graph, config, args.pods, args.runs, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.export_csv(table, out / "metrics.csv")
    harness.export_plotdata(table, out)
    harness.export_runs(table.points, out / "runs.csv")
    with (out / "metrics.csv").open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            print(",".join(row))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "gen-layout": cmd_gen_layout, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigError, InfeasibleLayout, InsufficientSamples) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EvacSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
