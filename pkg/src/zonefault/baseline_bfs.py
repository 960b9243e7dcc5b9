"""Exhaustive line-failure search baseline.

Enumerates every subset of the zone's internal lines, re-solves the AC
power flow without those lines, and keeps the subset whose exterior
voltages best match the observation. Exact but exponential -- it exists to
cross-validate the detector and to quantify the runtime gap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .attack_sim import AttackScenario, Observation, apply_attack
from .errors import IslandedGridError, ZoneTooLargeError
from .grid_model import Grid, Zone
from .power_flow import MAX_ITER, TOL_PF, InjectionSpec, solve_ac

DEFAULT_MAX_LINES = 20


@dataclass(frozen=True, eq=False)
class BfsResult:
    detected: frozenset[int]
    best_error: float
    evaluated: int
    skipped_no_solution: int
    early_stopped: bool
    per_cardinality_seconds: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "detected_lines": sorted(self.detected),
            "best_error": self.best_error,
            "evaluated": self.evaluated,
            "skipped_no_solution": self.skipped_no_solution,
            "early_stopped": self.early_stopped,
            "per_cardinality_seconds": {
                str(k): v for k, v in sorted(self.per_cardinality_seconds.items())
            },
        }


def bfs_detect(
    grid: Grid,
    zone: Zone,
    obs: Observation,
    *,
    max_lines: int = DEFAULT_MAX_LINES,
    early_stop: bool = True,
    stop_threshold: float | None = None,
    tol: float = TOL_PF,
    max_iter: int = MAX_ITER,
) -> BfsResult:
    """Return the failure subset minimizing the exterior voltage mismatch.

    Subsets are visited in (cardinality, lexicographic line id) order, so
    ties resolve to the smallest, lexicographically first subset. Candidate
    flows warm-start from the observed exterior plus pre-attack interior
    voltages. Subsets that island the grid or admit no AC solution are
    skipped and counted. With ``early_stop``, enumeration halts as soon as
    the mismatch drops below ``stop_threshold`` (default 10x the power-flow
    tolerance: below that, the error is solver noise).
    """
    from .attack_sim import enumerate_failure_sets

    m_h = zone.m_h
    if m_h > max_lines:
        raise ZoneTooLargeError(m_h, max_lines)
    if stop_threshold is None:
        stop_threshold = 10.0 * tol

    spec = InjectionSpec.from_grid(grid)
    ext_pos = grid.bus_positions(zone.exterior_nodes)
    v_obs_ext = obs.exterior_voltages

    warm = obs.pre_voltages.copy()
    warm[ext_pos] = v_obs_ext

    best_err = np.inf
    best_set: frozenset[int] = frozenset()
    evaluated = 0
    skipped = 0
    early = False
    per_k: dict[int, float] = {}

    for candidate in enumerate_failure_sets(zone, k_max=m_h, include_empty=True):
        k = len(candidate)
        t0 = time.perf_counter()
        try:
            reduced = apply_attack(grid, AttackScenario(zone=zone, failed_lines=candidate))
            outcome = solve_ac(reduced, spec, initial=warm, tol=tol, max_iter=max_iter)
        except IslandedGridError:
            skipped += 1
            per_k[k] = per_k.get(k, 0.0) + (time.perf_counter() - t0)
            continue
        per_k[k] = per_k.get(k, 0.0) + (time.perf_counter() - t0)
        if not outcome.converged:
            skipped += 1
            continue
        diff = outcome.voltages[ext_pos] - v_obs_ext
        err = float(np.linalg.norm(diff.real) + np.linalg.norm(diff.imag))
        evaluated += 1
        if err < best_err:
            best_err = err
            best_set = candidate
        if early_stop and err < stop_threshold:
            early = True
            break

    return BfsResult(
        detected=best_set,
        best_error=best_err,
        evaluated=evaluated,
        skipped_no_solution=skipped,
        early_stopped=early,
        per_cardinality_seconds=per_k,
    )
