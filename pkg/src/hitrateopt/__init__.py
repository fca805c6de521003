"""Hit-rate optimization for process quality prediction under dataset shift.

A numpy library plus experiment front end: hidden-Markov scenario
dynamics, quadratic surrogates with (multitask) elastic-net selection,
scenario reconstruction searched by quasi-convex bisection, and the
seeded Monte Carlo / rolling-window benchmarks that exercise it all.
"""

from .errors import (
    CapacityError,
    DegenerateDataError,
    HitRateOptError,
    InfeasibleTargetError,
    ValidationError,
)
from .features import (
    FeatureSchema,
    Scaler,
    apply_scaler,
    encode,
    expand_matrix,
    expand_quadratic,
    fit_scaler,
    quadratic_dim,
)
from .hmm import (
    BaumWelchResult,
    GaussianEmissionSpec,
    HmmSpec,
    StatePosterior,
    backward_smooth,
    baum_welch,
    emit_labels,
    flatten_factorial,
    forward,
    predict_next_state_probs,
    sample_state_path,
    viterbi,
)
from .metrics import (
    HitInterval,
    MetricReport,
    hit_rate,
    mae,
    mae_masked,
    mape,
    mape_a,
    r2,
    report,
    rmse,
    rmse_masked,
)
from .optimizer import (
    DataWindow,
    FeasibilityResult,
    FrontierPoint,
    HroResult,
    TrialRecord,
    assignment_weights,
    controlled_fit,
    feasibility_check,
    frontier,
    optimize_hit_rate,
)
from .pipeline import (
    PipelineConfig,
    ScenarioFitLog,
    SurrogateConfig,
    WindowModel,
    fit_window_model,
    optimize_window_model,
)
from .regression import (
    FitReport,
    PenaltyConfig,
    count_selected,
    fallback_fit,
    fit_elastic_net,
    fit_mten,
    fit_ols,
)
from .scenarios import (
    MixturePredictor,
    ResidualIntervals,
    ScenarioModel,
    ScenarioSet,
    assign_observed_state,
    initial_cluster,
    mixture_predict,
    reconstruct,
    scenario_density,
    update_probabilities,
)
from .simulate import (
    LabeledDataset,
    PopulationSpec,
    ShiftConfig,
    SimConfig,
    generate,
    generate_shift_stream,
    preset,
    split,
)

__version__ = "0.1.0"
