import numpy as np
import pytest

from conftest import (
    cycle_zone_grid,
    deficient_zone_grid,
    parallel_pair_grid,
    small_zone_grid,
)
from zonefault.attack_sim import AttackScenario, Observation, simulate_attack
from zonefault.detector import (
    METHOD_CONVEX,
    METHOD_EXACT,
    compute_exterior_rhs,
    confidence,
    detect_exact,
    detect_lp,
    expose,
    recover_voltages,
    simultaneous_recover,
)
from zonefault.errors import SingularObservationError
from zonefault.grid_model import Bus, BusKind, Line, incidence_block, make_grid, make_zone, submatrix
from zonefault.power_flow import InjectionSpec, solve_ac
from zonefault.zone_analysis import analyze_zone


@pytest.fixture(scope="module")
def small_setup():
    grid = small_zone_grid()
    zone = make_zone(grid, [4, 5, 6])
    spec = InjectionSpec.from_grid(grid)
    pre = solve_ac(grid, spec)
    diag = analyze_zone(grid, zone)
    return grid, zone, spec, pre, diag


def run_attack(grid, zone, spec, pre, failed):
    post, obs = simulate_attack(
        grid, AttackScenario(zone=zone, failed_lines=frozenset(failed)), spec, pre_state=pre
    )
    assert obs is not None
    v_true = post.voltages[grid.bus_positions(zone.h_nodes)]
    return obs, v_true


class TestExteriorRhs:
    def test_null_attack_matches_rearranged_pre_state(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, _ = run_attack(grid, zone, spec, pre, set())
        e = compute_exterior_rhs(obs)
        y_bh = submatrix(grid, grid.y_matrix, zone.exterior_nodes, zone.h_nodes)
        v_h_pre = pre.voltages[grid.bus_positions(zone.h_nodes)]
        assert np.abs(e - np.conj(y_bh) @ np.conj(v_h_pre)).max() < 1e-9

    def test_forward_simulation_residual(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5})
        e = compute_exterior_rhs(obs)
        y_bh = submatrix(grid, grid.y_matrix, zone.exterior_nodes, zone.h_nodes)
        lhs = np.diag(obs.exterior_voltages) @ np.conj(y_bh) @ np.conj(v_true)
        rhs = np.diag(obs.exterior_voltages) @ e
        assert np.linalg.norm(lhs - rhs) < 1e-8

    def test_zero_exterior_voltage_rejected(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, _ = run_attack(grid, zone, spec, pre, {5})
        bad = Observation(
            grid=grid,
            zone=zone,
            pre_voltages=obs.pre_voltages,
            exterior_voltages=obs.exterior_voltages * np.array([0, 1, 1, 1]),
            injections_post=obs.injections_post,
        )
        with pytest.raises(SingularObservationError):
            compute_exterior_rhs(bad)


class TestRecoverVoltages:
    def test_null_attack_recovers_pre_state(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, _ = run_attack(grid, zone, spec, pre, set())
        rec = recover_voltages(obs, diag)
        v_h_pre = pre.voltages[grid.bus_positions(zone.h_nodes)]
        assert np.abs(rec.zone_voltages - v_h_pre).max() < 1e-8
        assert rec.method == METHOD_EXACT

    def test_recovers_hidden_state_after_failures(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5, 6})
        rec = recover_voltages(obs, diag)
        rel = np.abs(rec.zone_voltages - v_true).max() / np.abs(v_true).max()
        assert rel < 1e-7
        assert rec.residual_norm < 1e-6

    def test_corrupted_observation_flagged_by_residual(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, _ = run_attack(grid, zone, spec, pre, {5})
        corrupted = Observation(
            grid=grid,
            zone=zone,
            pre_voltages=obs.pre_voltages,
            exterior_voltages=obs.exterior_voltages * np.array([1.1, 1, 1, 1]),
            injections_post=obs.injections_post,
        )
        rec = recover_voltages(corrupted, diag)
        assert rec.residual_norm > 1e-3  # far above LIN_TOL scale
        result = expose(corrupted, diag)
        assert "inconsistent_observation" in result.flags

    def test_rank_deficient_matrix_rejected(self):
        grid, zone = deficient_zone_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        obs, _ = run_attack(grid, zone, spec, pre, {7})
        with pytest.raises(ValueError, match="rank deficient"):
            recover_voltages(obs)


class TestDetectExact:
    def test_null_attack_yields_empty_support(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, set())
        ind = detect_exact(obs, v_true)
        assert ind.detected == frozenset()
        assert np.abs(ind.x).max() < 1e-8

    def test_single_failure_detected_with_clean_margins(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {6})
        ind = detect_exact(obs, v_true)
        assert ind.detected == frozenset({6})
        others = [x for lid, x in zip(zone.sorted_h_lines(), ind.x) if lid != 6]
        assert np.abs(others).max() < 1e-8

    def test_indicator_value_formula(self, small_setup):
        # constructive value: x_j = Re(y_j (V'_i - V'_k)) on the failed line
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5})
        ind = detect_exact(obs, v_true)
        ln = grid.line(5)
        post_v = {b: v for b, v in zip(zone.sorted_h_nodes(), v_true)}
        expected = np.real(ln.admittance * (post_v[ln.from_bus] - post_v[ln.to_bus]))
        j = zone.sorted_h_lines().index(5)
        assert ind.x[j] == pytest.approx(expected, rel=1e-6)

    def test_cyclic_zone_rejected(self):
        grid, zone, pair = parallel_pair_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        obs, v_true = run_attack(grid, zone, spec, pre, {pair[0]})
        with pytest.raises(ValueError, match="rank deficient"):
            detect_exact(obs, v_true)


class TestDetectLp:
    def test_agrees_with_exact_on_acyclic_zone(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5})
        exact = detect_exact(obs, v_true)
        lp = detect_lp(obs, v_true)
        assert lp.detected == exact.detected
        assert np.abs(lp.x - exact.x).max() < 1e-8

    def test_seven_cycle_three_failures_exact(self):
        grid, zone = cycle_zone_grid(7)
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        lines = zone.sorted_h_lines()
        failed = {lines[0], lines[2], lines[5]}
        obs, v_true = run_attack(grid, zone, spec, pre, failed)
        rec = recover_voltages(obs)
        ind = detect_lp(obs, rec.zone_voltages)
        assert ind.detected == frozenset(failed)

    def test_six_cycle_three_failures_boundary(self):
        # at |F| = m/2 uniqueness is lost; assert only that the answer is a
        # minimizer consistent with the balance equations
        grid, zone = cycle_zone_grid(6)
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        lines = zone.sorted_h_lines()
        failed = {lines[0], lines[2], lines[4]}
        obs, v_true = run_attack(grid, zone, spec, pre, failed)
        ind = detect_lp(obs, v_true)
        b, d_h = _balance_system(obs, v_true)
        x_true = _true_indicator(grid, zone, obs, v_true, failed)
        assert np.linalg.norm(d_h @ ind.x - b) < 1e-6
        assert np.abs(ind.x).sum() <= np.abs(x_true).sum() + 1e-6
        assert ind.detected <= set(zone.h_lines)

    def test_null_space_shift_preserves_feasibility(self):
        # connected cycle: D_H 1 = 0, so adding c*1 to a feasible indicator
        # keeps the balance equations satisfied
        grid, zone = cycle_zone_grid(5)
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        d_h = incidence_block(grid, zone.h_nodes, zone.h_lines)
        assert np.abs(d_h @ np.ones(zone.m_h)).max() < 1e-12
        lines = zone.sorted_h_lines()
        obs, v_true = run_attack(grid, zone, spec, pre, {lines[1]})
        b, d_h = _balance_system(obs, v_true)
        x_true = _true_indicator(grid, zone, obs, v_true, {lines[1]})
        shifted = x_true + 0.37
        assert np.linalg.norm(d_h @ shifted - b) < 1e-6


def _light_small_grid():
    """small_zone_grid topology at a quarter of the loading."""
    from conftest import small_zone_grid as _base

    base = _base()
    buses = [
        Bus(b.id, b.kind, b.p_inject / 4, b.q_inject / 4, b.v_mag_setpoint) for b in base.buses
    ]
    return make_grid(buses, base.lines)


def _balance_system(obs, v_h):
    from zonefault.detector import _failure_system

    return _failure_system(obs, v_h)


def _true_indicator(grid, zone, obs, v_h, failed):
    lines = zone.sorted_h_lines()
    v = {b: val for b, val in zip(zone.sorted_h_nodes(), v_h)}
    x = np.zeros(len(lines))
    for j, lid in enumerate(lines):
        if lid in failed:
            ln = grid.line(lid)
            x[j] = np.real(ln.admittance * (v[ln.from_bus] - v[ln.to_bus]))
    return x


class TestSimultaneousRecover:
    def test_matches_exact_branch_on_clean_zone(self):
        # light loading keeps the voltage-magnitude linearization inside its
        # validity regime, where the joint program reproduces the exact
        # pipeline (the coupling model error scales with the disturbance)
        grid = _light_small_grid()
        zone = make_zone(grid, [4, 5, 6])
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        diag = analyze_zone(grid, zone)
        obs, _ = run_attack(grid, zone, spec, pre, {6})
        rec_exact = recover_voltages(obs, diag)
        ind_exact = detect_exact(obs, rec_exact.zone_voltages)
        rec_conv, ind_conv, info = simultaneous_recover(obs, diag)
        assert rec_conv.method == METHOD_CONVEX
        rel = np.abs(rec_conv.zone_voltages - rec_exact.zone_voltages).max() / np.abs(
            rec_exact.zone_voltages
        ).max()
        assert rel < 1e-3
        # supports agree once sub-1e-4 coupling noise is ignored
        sup_conv = {l for l, x in zip(zone.sorted_h_lines(), ind_conv.x) if abs(x) > 1e-4}
        sup_exact = {l for l, x in zip(zone.sorted_h_lines(), ind_exact.x) if abs(x) > 1e-4}
        assert sup_conv == sup_exact == {6}

    def test_majority_support_on_deficient_singles(self):
        grid, zone = deficient_zone_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        hits = 0
        total = 0
        for lid in zone.sorted_h_lines():
            obs, _ = run_attack(grid, zone, spec, pre, {lid})
            _, ind, _ = simultaneous_recover(obs)
            total += 1
            if lid in ind.detected:
                hits += 1
        assert hits / total > 0.5

    def test_zero_injection_grid_flat_solution(self):
        buses = [
            Bus(1, BusKind.SLACK, 0, 0, 1.0),
            Bus(2, BusKind.PQ),
            Bus(3, BusKind.PQ),
            Bus(4, BusKind.PQ),
            Bus(5, BusKind.PQ),
        ]
        lines = [
            Line(1, 1, 2, 1 / 0.1j),
            Line(2, 2, 3, 1 / 0.12j),
            Line(3, 3, 4, 1 / 0.11j),
            Line(4, 4, 5, 1 / 0.09j),
            Line(5, 5, 1, 1 / 0.13j),
            Line(6, 2, 4, 1 / 0.15j),
        ]
        grid = make_grid(buses, lines)
        zone = make_zone(grid, [3, 4])
        spec = InjectionSpec.from_grid(grid)
        post, obs = simulate_attack(
            grid, AttackScenario(zone=zone, failed_lines=frozenset()), spec
        )
        rec, ind, _ = simultaneous_recover(obs)
        assert np.abs(rec.zone_voltages - 1.0).max() < 1e-5
        assert ind.detected == frozenset()


class TestConfidence:
    def test_perfect_answer_scores_100(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5})
        v_full = obs.pre_voltages.copy()
        v_full[grid.bus_positions(zone.exterior_nodes)] = obs.exterior_voltages
        v_full[grid.bus_positions(zone.h_nodes)] = v_true
        conf = confidence(grid, frozenset({5}), v_full, obs)
        assert conf.c_p == pytest.approx(100.0, abs=1e-6)
        assert conf.c_q == pytest.approx(100.0, abs=1e-6)

    def test_wrong_detection_degrades_both_scores(self, small_setup):
        # monotone degradation only; the Q-vs-P sensitivity ordering is a
        # statistical property checked over many trials in the acceptance
        # suite
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5})
        v_full = obs.pre_voltages.copy()
        v_full[grid.bus_positions(zone.exterior_nodes)] = obs.exterior_voltages
        v_full[grid.bus_positions(zone.h_nodes)] = v_true
        right = confidence(grid, frozenset({5}), v_full, obs)
        wrong = confidence(grid, frozenset({6}), v_full, obs)
        assert wrong.c_p < right.c_p - 1e-3
        assert wrong.c_q < right.c_q - 1e-3

    def test_zero_reactive_reference_gives_null(self):
        buses = [Bus(1, BusKind.SLACK, 0, 0, 1.0), Bus(2, BusKind.PQ), Bus(3, BusKind.PQ)]
        lines = [Line(1, 1, 2, 1 / 0.1j), Line(2, 2, 3, 1 / 0.1j)]
        grid = make_grid(buses, lines)
        zone = make_zone(grid, [3])
        spec = InjectionSpec.from_grid(grid)
        post, obs = simulate_attack(grid, AttackScenario(zone=zone, failed_lines=frozenset()), spec)
        conf = confidence(grid, frozenset(), post.voltages, obs)
        assert conf.c_p is None  # zero-load grid: S' = 0 exactly
        assert conf.c_q is None


class TestExpose:
    def test_routes_to_exact_branch(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, v_true = run_attack(grid, zone, spec, pre, {5, 6})
        result = expose(obs, diag)
        assert result.method == METHOD_EXACT
        assert result.detected_lines == frozenset({5, 6})
        assert result.confidence.c_p > 99.99

    def test_routes_to_lp_on_cyclic_zone(self):
        grid, zone = cycle_zone_grid(5)
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        diag = analyze_zone(grid, zone)
        assert diag.gamma_h == 1
        lines = zone.sorted_h_lines()
        obs, _ = run_attack(grid, zone, spec, pre, {lines[0], lines[3]})
        result = expose(obs, diag)
        assert result.method == METHOD_EXACT  # voltage branch is still linear
        assert result.detected_lines == frozenset({lines[0], lines[3]})

    def test_routes_to_convex_on_deficient_zone(self):
        grid, zone = deficient_zone_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        diag = analyze_zone(grid, zone)
        assert diag.lambda_h > 0
        obs, _ = run_attack(grid, zone, spec, pre, {10})
        result = expose(obs, diag)
        assert result.method == METHOD_CONVEX

    def test_parallel_pair_ambiguity_pattern(self):
        grid, zone, pair = parallel_pair_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        diag = analyze_zone(grid, zone)
        for true_line in pair:
            obs, _ = run_attack(grid, zone, spec, pre, {true_line})
            result = expose(obs, diag)
            assert true_line in result.detected_lines
            assert result.detected_lines <= set(pair)
            assert "non_unique_support" in result.flags

    def test_lp_and_convex_branches_are_deterministic(self):
        # identical inputs must yield identical indicators and supports
        grid, zone, pair = parallel_pair_grid()
        spec = InjectionSpec.from_grid(grid)
        pre = solve_ac(grid, spec)
        diag = analyze_zone(grid, zone)
        _, obs = simulate_attack(
            grid, AttackScenario(zone=zone, failed_lines=frozenset({pair[0]})), spec, pre_state=pre
        )
        first = expose(obs, diag)
        second = expose(obs, diag)
        assert first.detected_lines == second.detected_lines
        assert np.array_equal(first.indicator.x, second.indicator.x)

        dgrid, dzone = deficient_zone_grid()
        dspec = InjectionSpec.from_grid(dgrid)
        dpre = solve_ac(dgrid, dspec)
        ddiag = analyze_zone(dgrid, dzone)
        _, dobs = simulate_attack(
            dgrid, AttackScenario(zone=dzone, failed_lines=frozenset({10})), dspec, pre_state=dpre
        )
        a = expose(dobs, ddiag)
        b = expose(dobs, ddiag)
        assert a.detected_lines == b.detected_lines
        assert np.allclose(a.indicator.x, b.indicator.x, atol=1e-12)

    def test_detection_result_serialization(self, small_setup):
        grid, zone, spec, pre, diag = small_setup
        obs, _ = run_attack(grid, zone, spec, pre, {5})
        d = expose(obs, diag).to_dict()
        assert d["method"] == METHOD_EXACT
        assert d["detected_lines"] == [5]
        assert len(d["x_values"]) == zone.m_h
        assert len(d["v_h_recovered"]["re"]) == zone.n_h
        assert 0 <= d["c_q"] <= 100
