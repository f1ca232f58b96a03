"""Model-free prediction from multivariate time series.

Causal pre-selection of lagged predictors by iterative conditional-
independence testing, globally optimal subset selection by maximal
estimated multivariate mutual information, and nearest-neighbor or
linear forecasting, together with the competing MI-ranking and
CMI-forward selection schemes and a benchmark harness.
"""

from .core import (
    AlgorithmConfig,
    CostCounter,
    CrossValidationCutoff,
    DegenerateInputError,
    EstimatorConfig,
    FixedThreshold,
    HeuristicCutoff,
    LaggedVariable,
    MmiMaxCutoff,
    MmiMaxPlusCvCutoff,
    PredictionTask,
    PredictorSet,
    SchemeConfig,
    ShuffleSignificance,
    SingularDesignError,
    TimeSeriesPanel,
    design_matrix,
    read_panel_csv,
    standardize_panel,
    valid_target_times,
    write_panel_csv,
)
from .infotheory import (
    CmiEstimate,
    DegenerateDistanceWarning,
    ShuffleTestResult,
    estimate_cmi,
    shuffle_test,
)
from .causal import IterationRecord, PreselectionResult, preselect
from .selection import (
    SelectionResult,
    complexity_formulas,
    cross_validate_p,
    forward_cmi,
    heuristic_cutoff,
    optimal_subsets,
    rank_mi,
    run_scheme,
)
from .forecast import (
    ForecastResult,
    LinearModel,
    fit_linear,
    knn_predict,
    linear_forecast,
    linear_predict,
    srmse,
)
from .synth import (
    GroundTruth,
    gen_fixed_model,
    gen_gam_member,
    gen_synergetic_member,
    minimal_error_oracle,
)
from .bench import (
    ExperimentConfig,
    ModelSpec,
    load_config,
    run_experiment,
    run_member,
    run_sweep,
    split_learn_test,
)

__version__ = "0.1.0"
