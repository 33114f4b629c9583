"""Exact discrete optimal transport with a trust-region relaxation.

The package computes transport costs between weighted point clouds, the
relaxed cost minimized over a transport ball around one marginal (with
dual lambda-search and closed-form fast paths), finite-sample deviation
bounds guiding the ball radius, and a reproducible estimation experiment
comparing empirical, relaxed-empirical, and reference costs.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundInputs,
    BoundReport,
    confidence_radius,
    covering_constant_unit_cube,
    covering_unit_cube,
    cube_bound_at_cutoff,
    deviation_bound,
    deviation_bound_refined,
    optimized_cutoff_bound,
    optimized_cutoff_terms,
    relaxation_penalty,
)
from .costs import (
    CostSpec,
    PayoffValue,
    cost_matrix,
    distance_matrix,
    eval_cost,
    payoff_lipschitz,
    payoff_matrices,
    payoff_metric_power,
    payoff_order1,
    payoff_quadratic,
    squared_distance_matrix,
)
from .errors import SolverError, UnsupportedCostPair, ValidationError
from .experiment import (
    ExperimentConfig,
    ExperimentRow,
    SummaryRow,
    desk_config,
    emit_plot,
    load_config_json,
    paper_scale_config,
    run_experiment,
    summarize,
    write_rows_csv,
    write_summary_csv,
)
from .measures import (
    DiscreteMeasure,
    FactorModelParams,
    empirical_from_samples,
    load_measure_csv,
    resample,
    sample_factor_model,
    save_measure_csv,
)
from .relaxation import (
    DualEvaluation,
    MapAtom,
    RelaxedProblem,
    RelaxedSolution,
    dual_objective,
    map_pushforward,
    quadratic_value,
    recover_map,
    solve_relaxed,
    solve_relaxed_order1,
    solve_relaxed_quadratic,
)
from .transport import (
    TransportPlan,
    optimal_plan_extremes,
    solve_ot,
    solve_ot_max,
)
