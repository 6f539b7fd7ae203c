"""Nonparametric change-point detection via graph-induced-rank scans."""

from .errors import *  # noqa: F401,F403
from .rank_graph import (  # noqa: F401
    GraphSequence,
    RankMatrix,
    build_graph_sequence,
    compute_distances,
    default_graph_size,
    directed_weights,
    graph_induced_ranks,
    rank_summaries,
    round_half_away,
    weighted_graph_matrix,
)
from .scan import (  # noqa: F401
    NullMoments,
    ScanResult,
    ZPair,
    condition_diagnostics,
    default_interval_window,
    default_single_window,
    m_statistic,
    null_moment_arrays,
    null_moments,
    scan_interval,
    scan_single,
    t_statistic,
    window_sums,
    z_arrays,
    z_stats,
)
from .permutation import (  # noqa: F401
    EXHAUSTIVE_LIMIT,
    PermPlan,
    PermResult,
    empirical_critical_value,
    enumerate_null,
    null_scan_maxima,
    null_third_moments,
    null_z_draws,
    permutation_orders,
    permutation_pvalue,
    permuted_matrix,
)
from .analytic import (  # noqa: F401
    SkewnessTable,
    TailConfig,
    critical_value,
    h_functions,
    nu_approx,
    skewness_table,
    tail_M,
    tail_T,
    tail_probability,
)
from .simulate import (  # noqa: F401
    ALTERNATIVES,
    FAMILIES,
    SETTINGS,
    ConvergenceCurve,
    ExperimentConfig,
    PowerResult,
    SamplerSpec,
    benchmark_pair,
    covariance_matrix,
    derive_seed,
    rank_matrix_from_data,
    run_convergence_study,
    run_critical_value_study,
    run_power_study,
    sample_sequence,
)

__version__ = "0.1.0"
