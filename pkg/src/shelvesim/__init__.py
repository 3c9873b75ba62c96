"""Stochastic state-reduction trajectories for driven two- and three-level
emitters, with bright/dark fluorescence analysis and independent baselines.
"""

from .errors import (
    AnalysisError,
    DegenerateFitError,
    NumericError,
    OracleFitError,
    SchemeError,
    ShelvesimError,
    StepRejected,
    TriggerPreconditionError,
)
from .schemes import (
    ConfigurationKind,
    LevelScheme,
    RabiOnset,
    build_scheme,
    default_gap_threshold,
    desk_scheme,
    parse_scheme,
    scheme_hash,
    serialize_scheme,
)
from .records import (
    Channel,
    EmissionRecord,
    merge_records,
    read_emissions,
    write_emissions,
)
from .components import (
    BasisLabel,
    Component,
    Edge,
    EdgeKind,
    HamiltonianScope,
    Status,
    classify,
    dump_scope,
    launch,
    truncate,
)
from .programs import (
    ModelProgram,
    build_configuration,
    configuration_graph,
    loop_period,
    resonance_loop_program,
    three_level_v_model,
    two_level_model,
)
from .engine import (
    CurrentReport,
    SystemState,
    collapse,
    compute_currents,
    launch_state,
    run_ensemble,
    run_trajectory,
    sample_trigger,
    scope_currents,
    step,
)
from .baselines import (
    TelegraphParams,
    load_oracle,
    mcwf_baseline,
    oracle_filename,
    save_oracle,
    telegraph_oracle,
)
from .analysis import (
    ComparisonReport,
    DarkStats,
    FitResult,
    OrderingStats,
    PeriodSegmentation,
    compare_records,
    dark_statistics,
    exponential_ks,
    fit_waiting_distribution,
    interarrival_times,
    pooled_waiting_times,
    segment_periods,
    segmentation_summary,
    waiting_histogram,
    waiting_times,
    weak_ordering,
    write_histogram_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
