"""Experiment harness: sweep failure scenarios over zones, run the
detectors, and emit per-zone/per-cardinality metric tables.

Outputs are deterministic for a fixed config seed: metrics.csv carries the
accuracy aggregates (no timings, so bytes are reproducible), timings.csv
the wall-time means, scenarios.jsonl the per-scenario detail, and
excluded.jsonl the scenarios dropped for islanding or lack of an AC
solution.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attack_sim import AttackScenario, enumerate_failure_sets, simulate_attack
from .baseline_bfs import bfs_detect
from .detector import expose
from .errors import IslandedGridError
from .grid_model import Grid, Zone, make_zone
from .power_flow import InjectionSpec, solve_ac
from .zone_analysis import analyze_zone

ZONES_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ScenarioMetrics:
    """Detection quality of one algorithm on one scenario."""

    false_negatives: int
    false_positives: int
    v_mag_err_pct: float | None
    v_ang_err_pct: float | None
    c_p: float | None
    c_q: float | None
    wall_time_s: float


@dataclass
class ExperimentConfig:
    k_max: int = 3
    algorithms: tuple[str, ...] = ("expose",)
    seed: int = 0
    max_scenarios_per_k: int | None = None
    bfs_max_lines: int = 20
    bfs_early_stop: bool = True
    workers: int = 1  # keep 1 when wall-time comparisons matter


@dataclass
class ExperimentOutcome:
    metric_rows: list[dict]
    timing_rows: list[dict]
    scenario_records: list[dict]
    excluded: list[dict]


def wrapped_angle_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle difference wrapped into (-pi, pi]."""
    d = np.mod(a - b + np.pi, 2 * np.pi) - np.pi
    d[d == -np.pi] = np.pi
    return d


def voltage_errors(v_true: np.ndarray, v_rec: np.ndarray) -> tuple[float, float | None]:
    """Percentage L2 errors of recovered voltage magnitudes and angles."""
    mag_true = np.abs(v_true)
    mag_err = 100.0 * float(np.linalg.norm(np.abs(v_rec) - mag_true) / np.linalg.norm(mag_true))
    ang_true = np.angle(v_true)
    denom = float(np.linalg.norm(ang_true))
    if denom == 0.0:
        return mag_err, None
    d = wrapped_angle_diff(np.angle(v_rec), ang_true)
    return mag_err, 100.0 * float(np.linalg.norm(d) / denom)


def score_detection(
    true_failed: frozenset[int],
    detected: frozenset[int],
    v_true_h: np.ndarray | None,
    v_rec_h: np.ndarray | None,
    c_p: float | None,
    c_q: float | None,
    wall_time_s: float,
) -> ScenarioMetrics:
    mag_err = ang_err = None
    if v_true_h is not None and v_rec_h is not None:
        mag_err, ang_err = voltage_errors(v_true_h, v_rec_h)
    return ScenarioMetrics(
        false_negatives=len(true_failed - detected),
        false_positives=len(detected - true_failed),
        v_mag_err_pct=mag_err,
        v_ang_err_pct=ang_err,
        c_p=c_p,
        c_q=c_q,
        wall_time_s=wall_time_s,
    )


def build_nested_zones(grid: Grid, seed, levels: int) -> list[Zone]:
    """Nested zones grown by breadth-first rings from a seed node set.

    Level 1 is the seed set itself; each next level adds every neighbor of
    the current zone, always excluding the slack bus. Growth stops (with a
    warning) when a ring adds nothing or would swallow the whole grid.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    seed_ids = {int(seed)} if np.isscalar(seed) else {int(s) for s in seed}
    slack = grid.slack_id
    if slack in seed_ids:
        raise ValueError("seed set may not contain the slack bus")
    neighbors: dict[int, set[int]] = {b.id: set() for b in grid.buses}
    for ln in grid.lines:
        neighbors[ln.from_bus].add(ln.to_bus)
        neighbors[ln.to_bus].add(ln.from_bus)

    zones = []
    current = set(seed_ids)
    for level in range(1, levels + 1):
        if level > 1:
            ring = set()
            for u in current:
                ring |= neighbors[u]
            ring -= current
            ring.discard(slack)
            if not ring or len(current | ring) >= grid.n - 1:
                warnings.warn(
                    f"nested zone growth truncated at level {level - 1} "
                    f"({len(current)} of {grid.n} buses)",
                    stacklevel=2,
                )
                break
            current |= ring
        zones.append(make_zone(grid, current))
    return zones


def load_zones_file(grid: Grid, path) -> list[tuple[str, Zone]]:
    """Zone config: explicit node lists and/or a nested-growth request."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema_version") != ZONES_SCHEMA_VERSION:
        raise ValueError(f"unsupported zones schema: {data.get('schema_version')!r}")
    out: list[tuple[str, Zone]] = []
    for i, entry in enumerate(data.get("zones", [])):
        name = entry.get("name", f"zone{i + 1}")
        out.append((name, make_zone(grid, entry["nodes"])))
    nested = data.get("nested")
    if nested:
        zones = build_nested_zones(grid, nested["seed"], nested["levels"])
        prefix = nested.get("name", "level")
        out.extend((f"{prefix}{i + 1}", z) for i, z in enumerate(zones))
    if not out:
        raise ValueError("zones file defines no zones")
    return out


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def _scenario_task(args):
    """One scenario end to end (module-level so worker processes can run it)."""
    grid, zone_name, zone, diag, spec, pre, k, failed, config = args
    scenario = AttackScenario(zone=zone, failed_lines=failed)
    try:
        post, obs = simulate_attack(grid, scenario, spec, pre_state=pre)
    except IslandedGridError:
        return ("islanded", zone_name, k, failed, None)
    if obs is None:
        return ("no_solution", zone_name, k, failed, None)
    v_true_h = post.voltages[grid.bus_positions(zone.h_nodes)]
    results = []
    for alg in config.algorithms:
        metrics, detail = _run_algorithm(alg, grid, zone, obs, diag, failed, v_true_h, config)
        results.append((alg, metrics, detail))
    return ("ok", zone_name, k, failed, results)


def run_experiment(
    grid: Grid,
    zones: list[tuple[str, Zone]],
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> ExperimentOutcome:
    """Enumerate failure scenarios per zone, run the configured algorithms,
    and aggregate ScenarioMetrics means per (zone, cardinality, algorithm).

    Scenarios are independent, so with ``config.workers > 1`` they run in a
    process pool; aggregation is order-stable either way.
    """
    for alg in config.algorithms:
        if alg not in ("expose", "bfs"):
            raise ValueError(f"unknown algorithm {alg!r}")
    spec = InjectionSpec.from_grid(grid)
    pre = solve_ac(grid, spec)
    if not pre.converged:
        raise ValueError("pre-attack power flow did not converge")
    rng = np.random.default_rng(config.seed)

    records: list[dict] = []
    excluded: list[dict] = []
    per_bucket: dict[tuple[str, int, str], list[ScenarioMetrics]] = {}
    zone_diag: dict[str, dict] = {}

    tasks = []
    for zone_name, zone in zones:
        diag = analyze_zone(grid, zone)
        zone_diag[zone_name] = {"lambda_h": diag.lambda_h, "gamma_h": diag.gamma_h}
        for k in range(1, config.k_max + 1):
            failure_sets = [f for f in enumerate_failure_sets(zone, k_max=k) if len(f) == k]
            if config.max_scenarios_per_k is not None and len(failure_sets) > config.max_scenarios_per_k:
                idx = rng.choice(len(failure_sets), size=config.max_scenarios_per_k, replace=False)
                failure_sets = [failure_sets[i] for i in sorted(idx)]
            tasks.extend(
                (grid, zone_name, zone, diag, spec, pre, k, failed, config)
                for failed in failure_sets
            )

    if config.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_scenario_task, tasks, chunksize=4))
    else:
        outcomes = [_scenario_task(t) for t in tasks]

    for status, zone_name, k, failed, results in outcomes:
        if status != "ok":
            excluded.append(
                {"zone": zone_name, "failed_lines": sorted(failed), "reason": status}
            )
            continue
        for alg, metrics, detail in results:
            per_bucket.setdefault((zone_name, k, alg), []).append(metrics)
            records.append(
                {
                    "zone": zone_name,
                    "k": k,
                    "algorithm": alg,
                    "failed_lines": sorted(failed),
                    "detected_lines": sorted(detail["detected"]),
                    "false_negatives": metrics.false_negatives,
                    "false_positives": metrics.false_positives,
                    "v_mag_err_pct": metrics.v_mag_err_pct,
                    "v_ang_err_pct": metrics.v_ang_err_pct,
                    "c_p": metrics.c_p,
                    "c_q": metrics.c_q,
                    "wall_time_s": metrics.wall_time_s,
                    "method": detail.get("method"),
                    "flags": detail.get("flags", []),
                }
            )

    metric_rows = []
    timing_rows = []
    for (zone_name, k, alg), bucket in sorted(per_bucket.items()):
        row = {
            "zone": zone_name,
            "k": k,
            "algorithm": alg,
            "n_scenarios": len(bucket),
            "mean_false_negatives": _mean([m.false_negatives for m in bucket]),
            "mean_false_positives": _mean([m.false_positives for m in bucket]),
            "mean_v_mag_err_pct": _mean([m.v_mag_err_pct for m in bucket]),
            "mean_v_ang_err_pct": _mean([m.v_ang_err_pct for m in bucket]),
            "mean_c_p": _mean([m.c_p for m in bucket]),
            "mean_c_q": _mean([m.c_q for m in bucket]),
            "lambda_h": zone_diag[zone_name]["lambda_h"],
            "gamma_h": zone_diag[zone_name]["gamma_h"],
        }
        metric_rows.append(row)
        timing_rows.append(
            {
                "zone": zone_name,
                "k": k,
                "algorithm": alg,
                "mean_wall_time_s": _mean([m.wall_time_s for m in bucket]),
            }
        )

    outcome = ExperimentOutcome(
        metric_rows=metric_rows,
        timing_rows=timing_rows,
        scenario_records=records,
        excluded=excluded,
    )
    if out_dir is not None:
        _write_outputs(outcome, Path(out_dir))
    return outcome


def _run_algorithm(alg, grid, zone, obs, diag, failed, v_true_h, config):
    if alg == "expose":
        t0 = time.perf_counter()
        result = expose(obs, diag)
        dt = time.perf_counter() - t0
        metrics = score_detection(
            failed,
            result.detected_lines,
            v_true_h,
            result.recovered.zone_voltages,
            result.confidence.c_p,
            result.confidence.c_q,
            dt,
        )
        detail = {
            "detected": result.detected_lines,
            "method": result.method,
            "flags": list(result.flags),
        }
        return metrics, detail
    t0 = time.perf_counter()
    result = bfs_detect(
        grid,
        zone,
        obs,
        max_lines=config.bfs_max_lines,
        early_stop=config.bfs_early_stop,
    )
    dt = time.perf_counter() - t0
    metrics = score_detection(failed, result.detected, None, None, None, None, dt)
    return metrics, {"detected": result.detected, "method": "bfs"}


_METRIC_COLUMNS = [
    "zone",
    "k",
    "algorithm",
    "n_scenarios",
    "mean_false_negatives",
    "mean_false_positives",
    "mean_v_mag_err_pct",
    "mean_v_ang_err_pct",
    "mean_c_p",
    "mean_c_q",
    "lambda_h",
    "gamma_h",
]


def _write_outputs(outcome: ExperimentOutcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRIC_COLUMNS)
        for row in outcome.metric_rows:
            writer.writerow([_fmt(row[c]) for c in _METRIC_COLUMNS])
    with open(out_dir / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["zone", "k", "algorithm", "mean_wall_time_s"])
        for row in outcome.timing_rows:
            writer.writerow(
                [row["zone"], row["k"], row["algorithm"], _fmt(row["mean_wall_time_s"])]
            )
    with open(out_dir / "scenarios.jsonl", "w") as fh:
        for rec in outcome.scenario_records:
            fh.write(json.dumps(rec) + "\n")
    with open(out_dir / "excluded.jsonl", "w") as fh:
        for rec in outcome.excluded:
            fh.write(json.dumps(rec) + "\n")
