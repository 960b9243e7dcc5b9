"""Newton-Raphson AC power flow in polar coordinates, dense linear algebra.

The solver is the ground-truth engine: it simulates post-attack states and
backs the brute-force baseline. It is a pure function of (grid, spec,
initial); a failed solve is a first-class outcome, not an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import BusKind, Grid

TOL_PF = 1e-8  # p.u. power mismatch for convergence
MAX_ITER = 30
VM_MIN, VM_MAX = 0.2, 5.0  # divergence guard on voltage magnitudes


@dataclass(frozen=True, eq=False)
class InjectionSpec:
    """Per-bus power-flow constraints, aligned to grid bus positions.

    slack: fixed voltage (magnitude from vm_set, angle 0)
    PV:    fixed p_set and magnitude vm_set
    PQ:    fixed p_set and q_set
    """

    kinds: tuple[BusKind, ...]
    p_set: np.ndarray
    q_set: np.ndarray
    vm_set: np.ndarray  # NaN where unconstrained

    @classmethod
    def from_grid(cls, grid: Grid) -> "InjectionSpec":
        kinds = tuple(b.kind for b in grid.buses)
        p = np.array([b.p_inject for b in grid.buses])
        q = np.array([b.q_inject for b in grid.buses])
        vm = np.array(
            [b.v_mag_setpoint if b.v_mag_setpoint is not None else np.nan for b in grid.buses]
        )
        return cls(kinds=kinds, p_set=p, q_set=q, vm_set=vm)

    def index_sets(self):
        slack = [i for i, k in enumerate(self.kinds) if k is BusKind.SLACK]
        pv = [i for i, k in enumerate(self.kinds) if k is BusKind.PV]
        pq = [i for i, k in enumerate(self.kinds) if k is BusKind.PQ]
        return np.array(slack), np.array(pv, dtype=int), np.array(pq, dtype=int)


@dataclass(frozen=True, eq=False)
class PowerFlowOutcome:
    """Result of one AC solve; injections cover all buses when converged."""

    converged: bool
    voltages: np.ndarray | None
    injections: np.ndarray | None
    iterations: int
    max_mismatch: float

    @property
    def no_solution(self) -> bool:
        return not self.converged


def compute_injections(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Complex nodal injections S = diag(V) (Y V)* for a voltage state."""
    return v * np.conj(grid.y_matrix @ v)


def _ds_dv(y: np.ndarray, v: np.ndarray):
    """Partial derivatives of S w.r.t. voltage angle and magnitude."""
    i_bus = y @ v
    diag_v = np.diag(v)
    diag_i = np.diag(i_bus)
    diag_vnorm = np.diag(v / np.abs(v))
    ds_dvm = diag_v @ np.conj(y @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    return ds_dva, ds_dvm


def mismatch(grid: Grid, spec: InjectionSpec, v: np.ndarray) -> np.ndarray:
    """Stacked [dP at PV+PQ; dQ at PQ] residuals (spec minus computed)."""
    _, pv, pq = spec.index_sets()
    pvpq = np.sort(np.concatenate([pv, pq]))
    s = v * np.conj(grid.y_matrix @ v)
    dp = spec.p_set[pvpq] - s.real[pvpq]
    dq = spec.q_set[pq] - s.imag[pq]
    return np.concatenate([dp, dq])


def jacobian(grid: Grid, spec: InjectionSpec, v: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of -mismatch w.r.t. [theta(PV+PQ); |V|(PQ)]."""
    _, pv, pq = spec.index_sets()
    pvpq = np.sort(np.concatenate([pv, pq]))
    ds_dva, ds_dvm = _ds_dv(grid.y_matrix, v)
    j11 = ds_dva[np.ix_(pvpq, pvpq)].real
    j12 = ds_dvm[np.ix_(pvpq, pq)].real
    j21 = ds_dva[np.ix_(pq, pvpq)].imag
    j22 = ds_dvm[np.ix_(pq, pq)].imag
    return np.block([[j11, j12], [j21, j22]])


def solve_ac(
    grid: Grid,
    spec: InjectionSpec,
    initial: np.ndarray | None = None,
    tol: float = TOL_PF,
    max_iter: int = MAX_ITER,
) -> PowerFlowOutcome:
    """Full-Newton AC power flow.

    Flat start (setpoint magnitude, zero angle) unless ``initial`` gives a
    warm-start voltage vector. Returns a non-converged outcome on iteration
    exhaustion, singular Jacobian, or voltage magnitudes leaving
    [VM_MIN, VM_MAX].
    """
    slack, pv, pq = spec.index_sets()
    if len(slack) != 1:
        raise ValueError("power flow needs exactly one slack bus")
    pvpq = np.sort(np.concatenate([pv, pq]))
    npvpq = len(pvpq)

    if initial is None:
        vm = np.where(np.isnan(spec.vm_set), 1.0, spec.vm_set)
        va = np.zeros(grid.n)
    else:
        vm = np.abs(np.asarray(initial, dtype=complex))
        va = np.angle(initial)
    # re-impose the hard voltage constraints
    vm[slack] = spec.vm_set[slack]
    if len(pv):
        vm[pv] = spec.vm_set[pv]
    va[slack] = 0.0
    v = vm * np.exp(1j * va)

    it = 0
    mis = np.inf
    while True:
        s = v * np.conj(grid.y_matrix @ v)
        dp = spec.p_set[pvpq] - s.real[pvpq]
        dq = spec.q_set[pq] - s.imag[pq]
        f = np.concatenate([dp, dq])
        mis = float(np.max(np.abs(f))) if f.size else 0.0
        if mis <= tol:
            return PowerFlowOutcome(True, v, s, it, mis)
        if it >= max_iter:
            return PowerFlowOutcome(False, None, None, it, mis)
        jac = jacobian(grid, spec, v)
        try:
            dx = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            return PowerFlowOutcome(False, None, None, it, mis)
        if not np.all(np.isfinite(dx)):
            return PowerFlowOutcome(False, None, None, it, mis)
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        if np.any(vm < VM_MIN) or np.any(vm > VM_MAX):
            return PowerFlowOutcome(False, None, None, it + 1, mis)
        v = vm * np.exp(1j * va)
        it += 1
