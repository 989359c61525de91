"""Calibration study toolkit for binary bioactivity classifiers.

Trains small two-layer networks on sparse fingerprint features and compares
model-selection metrics and uncertainty-calibration methods: Platt scaling,
Monte Carlo dropout, deep ensembles, and Bayesian linear probing sampled
with Hamiltonian Monte Carlo.
"""

__version__ = "0.1.0"

from .data import (
    LabeledDataset,
    PredictionSet,
    SparseBinaryVector,
    SparseFormatError,
    Split,
    load_predictions,
    load_sparse_dataset,
    logit,
    save_predictions,
    save_sparse_dataset,
    sigmoid,
)
from .folds import (
    ClusterAssignment,
    assign_folds,
    leader_cluster,
    load_fold_file,
    make_split,
    save_fold_file,
    tanimoto,
)
from .metrics import (
    BinnedCalibration,
    accuracy,
    auc,
    bce_loss,
    brier,
    brier_decomposition,
    calibration_error,
)
from .mlp import (
    MlpHyperparams,
    MlpModel,
    TrainingDiverged,
    bce_gradient,
    train,
)
from .calibrate import (
    Ensemble,
    PlattParams,
    ensemble_predict,
    ensemble_train,
    load_ensemble,
    mc_dropout_predict,
    platt_apply,
    platt_fit,
    save_ensemble,
)
from .blp import (
    BlpConfig,
    BlpTarget,
    DivergenceError,
    PosteriorSamples,
    blp_predict,
    fit_blp,
    hmc_sample,
    leapfrog,
    neg_log_posterior,
    select_prior_precision,
)
from .tuning import GridSpec, evaluate_hp_metric, grid_search
from .stats import (
    RepeatResults,
    mark_best,
    paired_ttest,
    regularized_incomplete_beta,
    render_table,
    t_cdf,
    unpaired_ttest,
)
from .harness import (
    RunConfig,
    SyntheticSpec,
    evaluate_predictions,
    make_synthetic,
    run_experiment,
)
from .seeding import derive_seed
