"""Attack simulation: remove lines inside a zone, black out its measurements.

The simulator produces an :class:`Observation` -- exactly what the control
center still knows after the attack: the pre-attack state, post-attack
voltages outside the zone, and the full post-attack injection vector
(loads assumed unchanged, generator outputs reported from outside).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import IslandedGridError
from .grid_model import Grid, Zone, connected_components, make_grid, make_zone
from .power_flow import InjectionSpec, PowerFlowOutcome, solve_ac

OBSERVATION_SCHEMA_VERSION = 1
SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AttackScenario:
    """A zone plus the set of its internal lines taken out by the attacker.

    An empty failure set is allowed as a null control case.
    """

    zone: Zone
    failed_lines: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "failed_lines", frozenset(int(i) for i in self.failed_lines))
        extra = self.failed_lines - self.zone.h_lines
        if extra:
            raise ValueError(f"failed lines {sorted(extra)} are not inside the zone")


@dataclass(frozen=True, eq=False)
class Observation:
    """Everything the control center sees after the attack.

    ``exterior_voltages`` is aligned with the ascending exterior bus ids;
    by construction there is no post-attack voltage for any zone bus.
    ``grid`` and ``pre_voltages`` describe the known pre-attack system.
    """

    grid: Grid
    zone: Zone
    pre_voltages: np.ndarray
    exterior_voltages: np.ndarray
    injections_post: np.ndarray

    def pre_zone_voltages(self) -> np.ndarray:
        return self.pre_voltages[self.grid.bus_positions(self.zone.h_nodes)]


def apply_attack(grid: Grid, scenario: AttackScenario) -> Grid:
    """Grid with the scenario's failed lines removed (Y and D rebuilt).

    Raises IslandedGridError if the removal disconnects the grid; such
    scenarios are discarded rather than solved per-island.
    """
    if not scenario.failed_lines:
        return grid
    remaining = [l for l in grid.lines if l.id not in scenario.failed_lines]
    if len(remaining) == grid.m:
        return grid
    n_comp = connected_components(grid.bus_ids, [(l.from_bus, l.to_bus) for l in remaining])
    if n_comp != 1:
        raise IslandedGridError(
            f"removing lines {sorted(scenario.failed_lines)} leaves {n_comp} islands"
        )
    return make_grid(grid.buses, remaining)


def simulate_attack(
    grid: Grid,
    scenario: AttackScenario,
    spec: InjectionSpec | None = None,
    pre_state: PowerFlowOutcome | None = None,
) -> tuple[PowerFlowOutcome, Observation | None]:
    """Solve the post-attack steady state and package the observation.

    Loads keep their pre-attack (P, Q) and generators their setpoints; the
    post-attack solve warm-starts from the pre-attack voltages (the closest
    solution branch). Returns (outcome, None) when the post-attack flow has
    no solution. The slack bus must be outside the zone, otherwise the
    zone's injections would not be knowable.
    """
    if spec is None:
        spec = InjectionSpec.from_grid(grid)
    slack_pos = spec.index_sets()[0][0]
    if grid.buses[slack_pos].id in scenario.zone.h_nodes:
        raise ValueError("slack bus inside the attacked zone is not supported")
    if pre_state is None:
        pre_state = solve_ac(grid, spec)
    if not pre_state.converged:
        raise ValueError("pre-attack power flow did not converge")

    attacked = apply_attack(grid, scenario)  # may raise IslandedGridError
    post = solve_ac(attacked, spec, initial=pre_state.voltages)
    if not post.converged:
        return post, None
    ext_pos = grid.bus_positions(scenario.zone.exterior_nodes)
    obs = Observation(
        grid=grid,
        zone=scenario.zone,
        pre_voltages=pre_state.voltages.copy(),
        exterior_voltages=post.voltages[ext_pos].copy(),
        injections_post=post.injections.copy(),
    )
    return post, obs


def enumerate_failure_sets(zone: Zone, k_max: int, include_empty: bool = False):
    """All k-subsets of the zone's lines, k <= k_max, in (cardinality,
    lexicographic line id) order. Deterministic, so runs are reproducible."""
    lines = zone.sorted_h_lines()
    lo = 0 if include_empty else 1
    for k in range(lo, min(k_max, len(lines)) + 1):
        for combo in itertools.combinations(lines, k):
            yield frozenset(combo)


# ---------------------------------------------------------------------------
# JSON wire formats
# ---------------------------------------------------------------------------


def scenario_to_dict(scenario: AttackScenario) -> dict:
    return {
        "schema_version": SCENARIO_SCHEMA_VERSION,
        "zone_nodes": scenario.zone.sorted_h_nodes(),
        "failed_lines": sorted(scenario.failed_lines),
    }


def scenario_from_dict(grid: Grid, data: dict) -> AttackScenario:
    # schema_version optional here: the minimal {zone_nodes, failed_lines}
    # shape is accepted as version 1
    if data.get("schema_version", SCENARIO_SCHEMA_VERSION) != SCENARIO_SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema: {data.get('schema_version')!r}")
    zone = make_zone(grid, data["zone_nodes"])
    return AttackScenario(zone=zone, failed_lines=frozenset(data["failed_lines"]))


def observation_to_dict(obs: Observation) -> dict:
    """Serialize; deliberately carries no post-attack voltage for zone buses."""
    ext_ids = obs.zone.sorted_exterior()
    return {
        "schema_version": OBSERVATION_SCHEMA_VERSION,
        "zone_nodes": obs.zone.sorted_h_nodes(),
        "bus_ids": list(obs.grid.bus_ids),
        "pre_voltages": _cvec(obs.pre_voltages),
        "exterior_bus_ids": ext_ids,
        "exterior_voltages": _cvec(obs.exterior_voltages),
        "injections_post": _cvec(obs.injections_post),
    }


def observation_from_dict(grid: Grid, data: dict) -> Observation:
    if data.get("schema_version") != OBSERVATION_SCHEMA_VERSION:
        raise ValueError(f"unsupported observation schema: {data.get('schema_version')!r}")
    if list(grid.bus_ids) != list(data["bus_ids"]):
        raise ValueError("observation bus ids do not match the grid")
    zone = make_zone(grid, data["zone_nodes"])
    if data["exterior_bus_ids"] != zone.sorted_exterior():
        raise ValueError("exterior bus ids do not match the zone")
    return Observation(
        grid=grid,
        zone=zone,
        pre_voltages=_unvec(data["pre_voltages"]),
        exterior_voltages=_unvec(data["exterior_voltages"]),
        injections_post=_unvec(data["injections_post"]),
    )


def save_observation(obs: Observation, path) -> None:
    with open(path, "w") as fh:
        json.dump(observation_to_dict(obs), fh, indent=1)


def load_observation(grid: Grid, path) -> Observation:
    with open(path) as fh:
        return observation_from_dict(grid, json.load(fh))


def _cvec(v: np.ndarray) -> dict:
    return {"re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}


def _unvec(d: dict) -> np.ndarray:
    return np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
