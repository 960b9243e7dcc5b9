"""Command-line interface.

Subcommands: zone-analyze, simulate, detect, bfs, experiment. All emit
JSON (or CSV/JSONL files for experiment) so results can be piped onward.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import attack_sim, baseline_bfs, detector, harness
from .grid_model import make_zone, parse_case
from .zone_analysis import analyze_zone


def _load_grid(path):
    with open(path) as fh:
        return parse_case(fh.read())


def _parse_ids(text):
    return [int(tok) for tok in text.replace(",", " ").split()]


def _add_case_arg(p):
    p.add_argument("--case", required=True, help="MATPOWER-style case file")


def _zone_from_args(grid, args):
    if args.nodes:
        return make_zone(grid, _parse_ids(args.nodes))
    with open(args.zone_file) as fh:
        data = json.load(fh)
    return make_zone(grid, data["zone_nodes"])


def _emit(payload, out):
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zonefault",
        description="Simulate line failures in a blacked-out grid zone and "
        "recover the hidden state from exterior measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zone-analyze", help="structural diagnostics for a zone")
    _add_case_arg(p)
    p.add_argument("--nodes", help="comma-separated zone bus ids")
    p.add_argument("--zone-file", help="JSON file with zone_nodes")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("simulate", help="apply an attack scenario, emit the observation")
    _add_case_arg(p)
    p.add_argument("--scenario", required=True, help="scenario JSON (zone_nodes, failed_lines)")
    p.add_argument("--out", help="observation JSON path (default stdout)")

    p = sub.add_parser("detect", help="run the detector on an observation")
    _add_case_arg(p)
    p.add_argument("--observation", required=True, help="observation JSON")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("bfs", help="brute-force baseline on an observation")
    _add_case_arg(p)
    p.add_argument("--observation", required=True)
    p.add_argument("--max-lines", type=int, default=baseline_bfs.DEFAULT_MAX_LINES)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("experiment", help="scenario sweep with metric tables")
    _add_case_arg(p)
    p.add_argument("--zones", required=True, help="zones config JSON")
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--algs", default="expose", help="comma list: expose,bfs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-scenarios-per-k", type=int, default=None)
    p.add_argument("--workers", type=int, default=1, help="scenario worker processes")

    args = parser.parse_args(argv)
    grid = _load_grid(args.case)

    if args.command == "zone-analyze":
        if not args.nodes and not args.zone_file:
            parser.error("zone-analyze needs --nodes or --zone-file")
        zone = _zone_from_args(grid, args)
        _emit(analyze_zone(grid, zone).to_dict(), args.out)

    elif args.command == "simulate":
        with open(args.scenario) as fh:
            scenario = attack_sim.scenario_from_dict(grid, json.load(fh))
        post, obs = attack_sim.simulate_attack(grid, scenario)
        if obs is None:
            _emit(
                {
                    "no_solution": True,
                    "iterations": post.iterations,
                    "final_mismatch": post.max_mismatch,
                },
                args.out,
            )
            return 1
        _emit(attack_sim.observation_to_dict(obs), args.out)

    elif args.command == "detect":
        with open(args.observation) as fh:
            obs = attack_sim.observation_from_dict(grid, json.load(fh))
        result = detector.expose(obs)
        _emit(result.to_dict(), args.out)

    elif args.command == "bfs":
        with open(args.observation) as fh:
            obs = attack_sim.observation_from_dict(grid, json.load(fh))
        result = baseline_bfs.bfs_detect(
            grid,
            obs.zone,
            obs,
            max_lines=args.max_lines,
            early_stop=not args.no_early_stop,
        )
        _emit(result.to_dict(), args.out)

    elif args.command == "experiment":
        zones = harness.load_zones_file(grid, args.zones)
        config = harness.ExperimentConfig(
            k_max=args.kmax,
            algorithms=tuple(a.strip() for a in args.algs.split(",") if a.strip()),
            seed=args.seed,
            max_scenarios_per_k=args.max_scenarios_per_k,
            workers=args.workers,
        )
        outcome = harness.run_experiment(grid, zones, config, out_dir=args.out)
        print(
            f"wrote {len(outcome.metric_rows)} metric rows, "
            f"{len(outcome.scenario_records)} scenario records, "
            f"{len(outcome.excluded)} excluded to {args.out}"
        )

    return 0


if __name__ == "__main__":
    sys.exit(main())
