"""BLE neighbor-discovery latency simulation and two-interval advertising selection."""

from .cpbis import (
    CandidatePair,
    CpbisReport,
    PartitionedCandidates,
    StageError,
    best_left_for,
    find_troughs,
    partition,
    prune_non_increasing,
    run_cpbis,
    select_optimal_pair,
    weighted_latency,
)
from .evaluate import BroadcastSchedule, TrialReport, compare_modes, run_trials
from .ndp_sim import LatencyCdf, SimScenario, estimate_cdf, quantile, simulate_one
from .sweep import SweepGrid, build_distribution, superimpose
from .types import (
    AdvertiserConfig,
    ConfigError,
    ConstraintConfig,
    DistributionPoint,
    DistributionSeries,
    ScanMode,
    validate_catalog,
)

__version__ = "0.1.0"
