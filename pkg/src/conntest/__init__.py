"""Sublinear-query property testing of binary-image connectedness."""

from .geometry import (
    DegenerateLattice,
    InvalidEps,
    LevelGeometry,
    LevelOutOfRange,
    NotNormalized,
    SquareRef,
    as_eps,
    diamond_decomposition,
    diamond_index,
    enumerate_squares,
    lattice_count,
    lattice_pitch,
    level_count,
    level_pitch,
    level_side,
    sample_square,
)
from .image import (
    ComponentLabeling,
    Image,
    connected_components,
    is_border_connected,
    is_connected,
)
from .instances import (
    DensityInfeasible,
    DotInstance,
    gen_connected,
    gen_dot_far,
    make_dot_square,
    min_far_dot_count,
)
from .oracle import (
    AllWhiteSource,
    FunctionSource,
    NonadaptiveOracle,
    PhaseViolation,
    PixelOracle,
)
from .testers import (
    PremiseViolated,
    UnsoundCertificate,
    Verdict,
    Witness,
    analytic_query_budget,
    check_premise,
    normalize,
    query_report,
    test_connectedness,
    verify_verdict,
)
from .cost import (
    AnalyticDotCost,
    AuditReport,
    BruteForceCost,
    CostUnavailable,
    OutputNotConnected,
    PatternViolation,
    TooLarge,
    connectify_via_grid,
    dot_local_cost,
    exact_dist_border_connected,
    exact_dist_connected,
    mod3_border_fix,
    nearest_border_connected,
    structural_audit,
)
from .hardlb import (
    HardMeta,
    HardParams,
    InvalidParams,
    WindowStats,
    classify_windows,
    farness_audit,
    make_hard_params,
    revealing_probability_exact,
    revealing_probability_mc,
    sample_hard,
    strategy_bridges,
    strategy_grid,
    strategy_uniform,
)
from .experiments import (
    TrialSummary,
    run_trials,
    run_trials_from_file,
    sweep,
    trial_seed,
    wilson_interval,
)
from . import pbm, report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
