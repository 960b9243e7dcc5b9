"""Attack simulation and hidden-state recovery for AC power grids.

Simulates line failures inside a measurement-blacked-out zone, then
recovers the zone's voltages and the failed-line set using only pre-attack
data and post-attack observations from outside the zone.
"""

from .attack_sim import (
    AttackScenario,
    Observation,
    apply_attack,
    enumerate_failure_sets,
    simulate_attack,
)
from .baseline_bfs import BfsResult, bfs_detect
from .cases import case_path, load_builtin_case
from .detector import (
    Confidence,
    DetectionResult,
    FailureIndicator,
    RecoveredState,
    confidence,
    detect_exact,
    detect_lp,
    expose,
    recover_voltages,
    simultaneous_recover,
)
from .errors import (
    CaseParseError,
    CaseSimplificationWarning,
    InconsistentRecoveryError,
    IslandedGridError,
    SingularObservationError,
    ZonefaultError,
    ZoneTooLargeError,
)
from .grid_model import (
    Bus,
    BusKind,
    Grid,
    Line,
    Zone,
    build_admittance,
    build_incidence,
    make_grid,
    make_zone,
    parse_case,
    submatrix,
)
from .harness import ExperimentConfig, build_nested_zones, run_experiment
from .power_flow import InjectionSpec, PowerFlowOutcome, compute_injections, solve_ac
from .zone_analysis import (
    ZoneDiagnostics,
    analyze_zone,
    build_m_matrix,
    check_acyclic,
    check_covering_matching,
    rank_deficits,
)

__version__ = "0.1.0"
