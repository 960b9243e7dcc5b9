"""Structural zone diagnostics that pick the detector's recovery regime.

Two conditions matter: a matching between exterior and zone buses that
covers the zone (voltage recovery solvable), and acyclicity of the zone's
internal lines (failure detection solvable by plain least squares). The
rank deficits lambda_h and gamma_h quantify how far a zone is from each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import Grid, Zone, incidence_block, submatrix

RANK_TOL = 1e-9  # relative to the largest singular value


@dataclass(frozen=True, eq=False)
class ZoneDiagnostics:
    """Recovery-regime diagnostics for one zone.

    lambda_h = 2*n_h - rank(m_matrix): deficit of the voltage-recovery
    system. gamma_h = m_h - rank(D restricted to the zone): number of
    independent cycles among the zone's internal lines.
    """

    m_matrix: np.ndarray
    has_covering_matching: bool
    is_acyclic: bool
    lambda_h: int
    gamma_h: int
    matching: tuple[tuple[int, int], ...]  # (exterior bus, zone bus) pairs

    def to_dict(self) -> dict:
        return {
            "lambda_h": self.lambda_h,
            "gamma_h": self.gamma_h,
            "has_covering_matching": self.has_covering_matching,
            "is_acyclic": self.is_acyclic,
            "matching_pairs": [list(p) for p in self.matching],
        }


def build_m_matrix(grid: Grid, zone: Zone) -> np.ndarray:
    """Real 2|exterior| x 2|zone| block matrix [[G, -B], [B, G]] built from
    the exterior-rows / zone-columns block of the admittance matrix."""
    y_bh = submatrix(grid, grid.y_matrix, zone.exterior_nodes, zone.h_nodes)
    g, b = y_bh.real, y_bh.imag
    return np.block([[g, -b], [b, g]])


def check_covering_matching(grid: Grid, zone: Zone) -> tuple[bool, tuple[tuple[int, int], ...]]:
    """Maximum bipartite matching over cut lines; covering iff it matches
    every zone bus to a distinct exterior neighbor.

    Parallel cut lines collapse to one candidate edge (matching is over
    node pairs). Augmenting-path search in deterministic ascending order.
    """
    adj: dict[int, list[int]] = {u: [] for u in zone.sorted_h_nodes()}
    for lid in sorted(zone.cut_lines):
        ln = grid.line(lid)
        if ln.from_bus in zone.h_nodes:
            zb, xb = ln.from_bus, ln.to_bus
        else:
            zb, xb = ln.to_bus, ln.from_bus
        if xb not in adj[zb]:
            adj[zb].append(xb)
    for nbrs in adj.values():
        nbrs.sort()

    match_ext: dict[int, int] = {}  # exterior bus -> zone bus

    def augment(u: int, banned: set[int]) -> bool:
        for x in adj[u]:
            if x in banned:
                continue
            banned.add(x)
            if x not in match_ext or augment(match_ext[x], banned):
                match_ext[x] = u
                return True
        return False

    size = 0
    for u in sorted(adj):
        if augment(u, set()):
            size += 1
    pairs = tuple(sorted((x, u) for x, u in match_ext.items()))
    return size == zone.n_h, pairs


def check_acyclic(grid: Grid, zone: Zone) -> bool:
    """True iff the zone's internal lines contain no cycle (a parallel pair
    counts as a two-node cycle). Union-find over the internal lines."""
    parent = {u: u for u in zone.h_nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for lid in zone.sorted_h_lines():
        ln = grid.line(lid)
        ru, rv = find(ln.from_bus), find(ln.to_bus)
        if ru == rv:
            return False
        parent[ru] = rv
    return True


def numerical_rank(matrix: np.ndarray, tol: float = RANK_TOL) -> int:
    """Singular values above ``tol`` relative to the largest one."""
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rank_deficits(grid: Grid, zone: Zone) -> tuple[int, int]:
    """(lambda_h, gamma_h) rank deficits of the recovery matrix and of the
    zone block of the incidence matrix."""
    m = build_m_matrix(grid, zone)
    d_h = incidence_block(grid, zone.h_nodes, zone.h_lines)
    lambda_h = 2 * zone.n_h - numerical_rank(m)
    gamma_h = zone.m_h - numerical_rank(d_h)
    return lambda_h, gamma_h


def analyze_zone(grid: Grid, zone: Zone) -> ZoneDiagnostics:
    """All diagnostics in one pass (the detector's routing input)."""
    m = build_m_matrix(grid, zone)
    covered, pairs = check_covering_matching(grid, zone)
    acyclic = check_acyclic(grid, zone)
    lambda_h, gamma_h = rank_deficits(grid, zone)
    return ZoneDiagnostics(
        m_matrix=m,
        has_covering_matching=covered,
        is_acyclic=acyclic,
        lambda_h=lambda_h,
        gamma_h=gamma_h,
        matching=pairs,
    )
