"""boxlens: model-agnostic explainability for tabular black-box models.

The toolkit covers the full working loop: load and repair a tabular
dataset, fit a small model zoo (GLM, boosted trees), tune it with a
cross-validated grid search, then interrogate the fitted model with
global profiles (importance, PDP, ICE, ALE), local attributions
(LIME-style surrogates, Shapley values, anchor rules) and group
fairness metrics.
"""

from .anchors import (
    AnchorRule,
    anchor_explain,
    anchor_metrics,
    anchors_to_csv,
    hoeffding_lower_bound,
)
from .data import (
    CATEGORICAL,
    NUMERIC,
    Column,
    MissingnessReport,
    SplitSpec,
    Table,
    from_rows,
    impute,
    kfold,
    load_csv,
    missingness,
    split,
    write_csv,
)
from .errors import (
    BoxlensError,
    ComputationError,
    ConfigError,
    CsvParseError,
    DataError,
    FitError,
    KernelWidthError,
    SchemaError,
    UndefinedMetricError,
    UnimputableError,
)
from .fairness import (
    ConfusionMatrix,
    GroupFairnessReport,
    GroupMetrics,
    confusion,
    group_fairness,
    group_fairness_from_scores,
    mcc,
    metrics_to_csv,
    roc_auc,
    roc_to_csv,
    write_fairness_csvs,
)
from .importance import (
    ImportanceReport,
    importance_to_csv,
    permutation_importance,
    write_importance_csv,
)
from .lime import LimeExplanation, default_kernel_width, lime_explain
from .models import (
    CallablePredictor,
    GbmModel,
    GbmParams,
    GlmModel,
    Predictor,
    load_model,
    model_from_json,
    model_to_json,
    residuals,
    rmse,
    save_model,
    train_gbm,
    train_glm,
)
from .perturb import (
    Predicate,
    PerturbationSampler,
    gower_distance,
    instance_table,
    rule_mask,
)
from .profiles import (
    Profile,
    ale_first_order,
    ale_second_order,
    ice,
    pdp,
    profile_to_csv,
    quantile_grid,
    write_profile_csv,
)
from .shapley import (
    EXACT_LIMIT,
    ShapleyAttribution,
    shapley_exact,
    shapley_mc,
)
from .svgplot import bar_chart, heatmap, line_plot, write_svg
from .synth import GENERATORS, SyntheticSpec, generate, write_synthetic
from .tuning import (
    DEFAULT_GRID_VALUES,
    GridSpec,
    TrialResult,
    best_trial,
    expand_grid,
    results_to_csv,
    search,
    trial_seed,
    write_results_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
