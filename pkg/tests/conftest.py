"""Shared fixtures: bench case files plus a family of purpose-built grids.

Each builder returns a grid whose zone has a known structural profile
(matched/acyclic, cyclic, rank-deficient, parallel pair) so tests can pin
down one recovery regime at a time.
"""

import warnings
from pathlib import Path

import pytest

from zonefault.grid_model import Bus, BusKind, Line, make_grid, make_zone, parse_case

DATA = Path(__file__).resolve().parents[1] / "src" / "zonefault" / "data"

# frozen matched+acyclic zones used across the suite
BENCH23_ZONE_NODES = tuple(range(11, 21))
BENCH118_ZONE_NODES = (7, 15, 30, 31, 50, 55, 83, 85, 90, 118)


def _y(r, x):
    return 1.0 / complex(r, x)


def load_case(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return parse_case((DATA / name).read_text())


@pytest.fixture(scope="session")
def bench23():
    return load_case("bench23.m")


@pytest.fixture(scope="session")
def bench118():
    return load_case("bench118.m")


@pytest.fixture(scope="session")
def bench23_zone(bench23):
    return make_zone(bench23, BENCH23_ZONE_NODES)


@pytest.fixture(scope="session")
def bench118_zone(bench118):
    return make_zone(bench118, BENCH118_ZONE_NODES)


def two_bus_grid(y=-5j, p_load=-0.1, q_load=0.0):
    buses = [
        Bus(1, BusKind.SLACK, 0.0, 0.0, 1.0),
        Bus(2, BusKind.PQ, p_load, q_load),
    ]
    return make_grid(buses, [Line(1, 1, 2, y)])


def triangle_grid(y=-10j):
    buses = [
        Bus(1, BusKind.SLACK, 0.0, 0.0, 1.0),
        Bus(2, BusKind.PQ, -0.1, -0.02),
        Bus(3, BusKind.PQ, -0.05, -0.01),
    ]
    lines = [Line(1, 1, 2, y), Line(2, 2, 3, y), Line(3, 1, 3, y)]
    return make_grid(buses, lines)


def ring4_grid():
    buses = [
        Bus(1, BusKind.SLACK, 0.0, 0.0, 1.0),
        Bus(2, BusKind.PQ, -0.12, -0.03),
        Bus(3, BusKind.PQ, -0.08, -0.02),
        Bus(4, BusKind.PQ, -0.1, -0.025),
    ]
    lines = [
        Line(1, 1, 2, _y(0.02, 0.1)),
        Line(2, 2, 3, _y(0.03, 0.12)),
        Line(3, 3, 4, _y(0.02, 0.09)),
        Line(4, 4, 1, _y(0.025, 0.11)),
    ]
    return make_grid(buses, lines)


def small_zone_grid():
    """7 buses; zone {4,5,6} is a matched acyclic path with 2 internal lines."""
    buses = [
        Bus(1, BusKind.PQ, -0.1, -0.02),
        Bus(2, BusKind.PV, 0.3, 0.0, 1.02),
        Bus(3, BusKind.PQ, -0.15, -0.05),
        Bus(4, BusKind.PQ, -0.2, -0.05),
        Bus(5, BusKind.PQ, -0.1, -0.03),
        Bus(6, BusKind.PQ, -0.12, -0.04),
        Bus(7, BusKind.SLACK, 0.0, 0.0, 1.0),
    ]
    lines = [
        Line(1, 1, 2, _y(0.02, 0.10)),
        Line(2, 2, 3, _y(0.03, 0.12)),
        Line(3, 3, 7, _y(0.02, 0.08)),
        Line(4, 7, 1, _y(0.02, 0.09)),
        Line(5, 4, 5, _y(0.03, 0.15)),
        Line(6, 5, 6, _y(0.02, 0.11)),
        Line(7, 1, 4, _y(0.02, 0.10)),
        Line(8, 2, 5, _y(0.03, 0.13)),
        Line(9, 3, 6, _y(0.02, 0.09)),
    ]
    return make_grid(buses, lines)


def cycle_zone_grid(m):
    """Zone = one m-cycle (buses 101..100+m), each zone bus tied to its own
    exterior partner on a ring that also carries the slack and a PV unit."""
    n_ext = m + 2
    buses = []
    for i in range(1, m + 1):
        buses.append(Bus(i, BusKind.PQ, -0.05 - 0.004 * i, -0.015))
    buses.append(Bus(m + 1, BusKind.PV, 0.3 + 0.02 * m, 0.0, 1.01))
    buses.append(Bus(m + 2, BusKind.SLACK, 0.0, 0.0, 1.0))
    for i in range(1, m + 1):
        buses.append(Bus(100 + i, BusKind.PQ, -0.04 - 0.003 * i, -0.012))
    lines = []
    lid = 1
    ring = list(range(1, n_ext + 1))
    for a, b in zip(ring, ring[1:] + ring[:1]):
        lines.append(Line(lid, a, b, _y(0.02, 0.08 + 0.004 * lid)))
        lid += 1
    cyc = [100 + i for i in range(1, m + 1)]
    first_zone_line = lid
    for a, b in zip(cyc, cyc[1:] + cyc[:1]):
        lines.append(Line(lid, a, b, _y(0.025, 0.1 + 0.003 * lid)))
        lid += 1
    zone_line_ids = list(range(first_zone_line, lid))
    for i in range(1, m + 1):
        lines.append(Line(lid, i, 100 + i, _y(0.02, 0.09 + 0.002 * lid)))
        lid += 1
    grid = make_grid(buses, lines)
    zone = make_zone(grid, cyc)
    assert sorted(zone.h_lines) == zone_line_ids
    return grid, zone


def parallel_pair_grid():
    """Zone path 11-12-13-14 with a duplicated 12-13 line (ids 8 and 9)."""
    buses = [Bus(i, BusKind.PQ, -0.05 - 0.01 * i, -0.015) for i in range(1, 5)]
    buses += [Bus(5, BusKind.PV, 0.35, 0.0, 1.01), Bus(6, BusKind.SLACK, 0.0, 0.0, 1.0)]
    buses += [Bus(10 + i, BusKind.PQ, -0.04 - 0.008 * i, -0.01) for i in range(1, 5)]
    lines = []
    lid = 1
    ring = [1, 2, 3, 4, 5, 6]
    for a, b in zip(ring, ring[1:] + ring[:1]):
        lines.append(Line(lid, a, b, _y(0.02, 0.08 + 0.004 * lid)))
        lid += 1
    for a, b in [(11, 12), (12, 13), (12, 13), (13, 14)]:
        lines.append(Line(lid, a, b, _y(0.025, 0.1 + 0.004 * lid)))
        lid += 1
    for i in range(1, 5):
        lines.append(Line(lid, i, 10 + i, _y(0.02, 0.09 + 0.003 * lid)))
        lid += 1
    grid = make_grid(buses, lines)
    return grid, make_zone(grid, [11, 12, 13, 14]), (8, 9)


def deficient_zone_grid():
    """Zone with both deficits: internal triangle (gamma_h = 1) and two zone
    buses sharing their only exterior neighbor (lambda_h = 2)."""
    buses = [Bus(i, BusKind.PQ, -0.06 - 0.01 * i, -0.02) for i in range(1, 5)]
    buses += [Bus(5, BusKind.PV, 0.45, 0.0, 1.02), Bus(6, BusKind.SLACK, 0.0, 0.0, 1.0)]
    buses += [Bus(10 + i, BusKind.PQ, -0.05 - 0.006 * i, -0.012 - 0.002 * i) for i in range(1, 6)]
    lines = []
    lid = 1
    ring = [1, 2, 3, 4, 5, 6]
    for a, b in zip(ring, ring[1:] + ring[:1]):
        lines.append(Line(lid, a, b, _y(0.02, 0.08 + 0.004 * lid)))
        lid += 1
    for a, b in [(11, 12), (12, 13), (11, 13), (13, 14), (14, 15)]:
        lines.append(Line(lid, a, b, _y(0.025, 0.1 + 0.004 * lid)))
        lid += 1
    for a, b in [(1, 11), (1, 12), (2, 13), (3, 14), (4, 15)]:
        lines.append(Line(lid, a, b, _y(0.02, 0.09 + 0.003 * lid)))
        lid += 1
    grid = make_grid(buses, lines)
    return grid, make_zone(grid, [11, 12, 13, 14, 15])


def path_zone_grid(n_zone):
    """Zone = path of n_zone buses (n_zone - 1 internal lines), one exterior
    partner per zone bus; used for the brute-force scaling sweeps."""
    buses = [Bus(i, BusKind.PQ, -0.03 - 0.002 * i, -0.01) for i in range(1, n_zone + 1)]
    buses += [
        Bus(n_zone + 1, BusKind.PV, 0.02 * n_zone + 0.25, 0.0, 1.01),
        Bus(n_zone + 2, BusKind.SLACK, 0.0, 0.0, 1.0),
    ]
    buses += [Bus(100 + i, BusKind.PQ, -0.025 - 0.002 * i, -0.008) for i in range(1, n_zone + 1)]
    lines = []
    lid = 1
    ring = list(range(1, n_zone + 3))
    for a, b in zip(ring, ring[1:] + ring[:1]):
        lines.append(Line(lid, a, b, _y(0.02, 0.07 + 0.003 * lid)))
        lid += 1
    path = [100 + i for i in range(1, n_zone + 1)]
    first = lid
    for a, b in zip(path, path[1:]):
        lines.append(Line(lid, a, b, _y(0.025, 0.09 + 0.002 * lid)))
        lid += 1
    zone_lines = list(range(first, lid))
    for i in range(1, n_zone + 1):
        lines.append(Line(lid, i, 100 + i, _y(0.02, 0.08 + 0.002 * lid)))
        lid += 1
    grid = make_grid(buses, lines)
    zone = make_zone(grid, path)
    assert sorted(zone.h_lines) == zone_lines
    return grid, zone


def random_connected_grid(rng, n, extra_edges=3):
    """Random connected grid with realistic-ish admittances (test helper)."""
    buses = [Bus(1, BusKind.SLACK, 0.0, 0.0, 1.0)]
    for i in range(2, n + 1):
        buses.append(Bus(i, BusKind.PQ, float(-rng.uniform(0.02, 0.1)), float(-rng.uniform(0.005, 0.03))))
    lines = []
    lid = 1
    for i in range(2, n + 1):
        j = int(rng.integers(1, i))
        lines.append(Line(lid, i, j, _y(rng.uniform(0.01, 0.05), rng.uniform(0.05, 0.2))))
        lid += 1
    for _ in range(extra_edges):
        a, b = rng.integers(1, n + 1, size=2)
        if a == b:
            continue
        lines.append(Line(lid, int(a), int(b), _y(rng.uniform(0.01, 0.05), rng.uniform(0.05, 0.2))))
        lid += 1
    return make_grid(buses, lines)
