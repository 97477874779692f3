"""Sequencing-depth trade-off simulator and analysis toolkit.

Given a fixed read budget, how many cells should a single-cell experiment
sequence?  This package simulates the two-stage sampling process (cells from
a population, reads within each cell), measures the resulting estimation
error as an exact Wasserstein distance, and exposes the closed-form error
bounds and allocation rules that predict the optimal cell count.
"""

__version__ = "0.1.0"

from .allocation import (
    ASYMPTOTIC_NOTES,
    DEFAULT_ALLOCATION_CONST,
    AllocationParams,
    expected_error_lower,
    expected_error_upper,
    full_lower_bound,
    lower_bound_valid,
    min_reads,
    optimal_cells,
    rate_upper,
    reads_floor,
    theory_curve,
)
from .dimension import (
    FactorPair,
    Spectrum,
    SynthesisResult,
    nmf,
    pca_intrinsic_dim,
    spectrum_to_csv,
    synthesize_low_dim,
)
from .errors import (
    DimensionMismatchError,
    EmptyMatrixError,
    InsufficientDataError,
    InvalidTrialsError,
    InvariantViolationError,
    MassMismatchError,
    ParseError,
    ScenarioMismatchError,
    SeqDepthError,
    SizeLimitError,
    TooLargeError,
    UnseenCellError,
    ZeroRowError,
)
from .experiment import (
    CellResult,
    NStar,
    SweepConfig,
    SweepResult,
    TrialRecord,
    emit_outputs,
    find_optimal_n,
    fit_slope,
    log_grid,
    read_results_csv,
    read_summary_csv,
    run_cell,
    sweep,
)
from .ingest import (
    CountsMatrix,
    build_population,
    file_digest,
    filter_genes,
    load_counts,
    load_population,
    preprocess,
    read_counts_csv,
    read_counts_mtx,
    save_population,
    select_hvg,
)
from .sequencing import (
    ReadAllocation,
    SequencingRun,
    WeightModel,
    allocate_reads,
    multinomial_estimate,
    noisy_empirical,
    sample_cells,
    shallow_sequence,
    shallow_sequence_reference,
    trial_rng,
)
from .simplex import (
    DiscreteDistribution,
    ExpressionProfile,
    PopulationStats,
    l0_norm,
    lq_distance,
    normalize_counts_row,
    population_stats,
)
from .wasserstein import (
    CostMatrix,
    TransportPlan,
    assignment_oracle,
    cost_matrix,
    emd,
    transport_plan,
    wasserstein_p,
)

__all__ = [
    "__version__",
    "ASYMPTOTIC_NOTES",
    "DEFAULT_ALLOCATION_CONST",
    "AllocationParams",
    "expected_error_lower",
    "expected_error_upper",
    "full_lower_bound",
    "lower_bound_valid",
    "min_reads",
    "optimal_cells",
    "rate_upper",
    "reads_floor",
    "theory_curve",
    "FactorPair",
    "Spectrum",
    "SynthesisResult",
    "nmf",
    "pca_intrinsic_dim",
    "spectrum_to_csv",
    "synthesize_low_dim",
    "DimensionMismatchError",
    "EmptyMatrixError",
    "InsufficientDataError",
    "InvalidTrialsError",
    "InvariantViolationError",
    "MassMismatchError",
    "ParseError",
    "ScenarioMismatchError",
    "SeqDepthError",
    "SizeLimitError",
    "TooLargeError",
    "UnseenCellError",
    "ZeroRowError",
    "CellResult",
    "NStar",
    "SweepConfig",
    "SweepResult",
    "TrialRecord",
    "emit_outputs",
    "find_optimal_n",
    "fit_slope",
    "log_grid",
    "read_results_csv",
    "read_summary_csv",
    "run_cell",
    "sweep",
    "CountsMatrix",
    "build_population",
    "file_digest",
    "filter_genes",
    "load_counts",
    "load_population",
    "preprocess",
    "read_counts_csv",
    "read_counts_mtx",
    "save_population",
    "select_hvg",
    "ReadAllocation",
    "SequencingRun",
    "WeightModel",
    "allocate_reads",
    "multinomial_estimate",
    "noisy_empirical",
    "sample_cells",
    "shallow_sequence",
    "shallow_sequence_reference",
    "trial_rng",
    "DiscreteDistribution",
    "ExpressionProfile",
    "PopulationStats",
    "l0_norm",
    "lq_distance",
    "normalize_counts_row",
    "population_stats",
    "CostMatrix",
    "TransportPlan",
    "assignment_oracle",
    "cost_matrix",
    "emd",
    "transport_plan",
    "wasserstein_p",
]
