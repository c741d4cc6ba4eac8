"""Query-budget analysis for masking-based explanations.

A sparse ground-truth attribution vector is probed through binary
masks whose responses pass through a noisy (optionally curved) scalar
channel.  This package provides the generative model, closed-form
information accounting, a Monte Carlo mutual-information estimator,
support decoders, and the experiment sweeps + CLI that tie them
together.
"""

from .errors import (DegenerateInteractionError, EnumerationCapError, InvalidArgumentError,
                     MaskChannelError)
from .rng import derive, generator, seed_sequence
from .model import (AMPLITUDE_MODES, ChannelConfig, MaskBatch, OracleModel, QueryDataset,
                    SparseExplanation, interference_power, oracle_evaluate, quadratic_form,
                    sample_mask_batch, sample_sparse_explanation, sample_trial,
                    scale_interaction_matrix)
from .information import (InfoBudget, capacity_envelope, critical_resolution,
                          dense_query_lower_bound, explanation_rate, info_budget,
                          per_query_mi_gaussian, sparse_query_lower_bound, support_entropy)
from .mi import (MiConfig, MiEstimate, ThresholdScan, estimate_mutual_information,
                 find_information_threshold, gaussian_log_likelihood)
from .decoders import (DecodeResult, LassoSettings, RecoveryStats, default_lasso_penalty,
                       lasso_decode, ls_fit_on_support, ml_decode, ols_decode, ridge_decode,
                       run_recovery_trials, support_recovery_probability)
from .experiments import (AchievabilityResult, PowerStats, SweepResult, SyntheticImage,
                          build_synthetic_image, draw_interaction_matrix, image_oracle_evaluate,
                          run_achievability_sweep, run_curvature_sweep, run_noise_sweep,
                          run_resolution_sweep, snap_superpixel_count)

__version__ = "0.1.0"

__all__ = [
    "MaskChannelError", "InvalidArgumentError", "DegenerateInteractionError",
    "EnumerationCapError",
    "seed_sequence", "derive", "generator",
    "SparseExplanation", "MaskBatch", "OracleModel", "QueryDataset", "ChannelConfig",
    "AMPLITUDE_MODES", "sample_sparse_explanation", "sample_mask_batch", "quadratic_form",
    "oracle_evaluate", "sample_trial", "interference_power", "scale_interaction_matrix",
    "support_entropy", "explanation_rate", "per_query_mi_gaussian", "capacity_envelope",
    "dense_query_lower_bound", "sparse_query_lower_bound", "critical_resolution",
    "InfoBudget", "info_budget",
    "MiConfig", "MiEstimate", "ThresholdScan", "gaussian_log_likelihood",
    "estimate_mutual_information", "find_information_threshold",
    "DecodeResult", "LassoSettings", "RecoveryStats", "default_lasso_penalty",
    "ls_fit_on_support", "ml_decode", "lasso_decode", "ols_decode", "ridge_decode",
    "run_recovery_trials", "support_recovery_probability",
    "PowerStats", "SweepResult", "AchievabilityResult", "SyntheticImage",
    "run_achievability_sweep", "run_noise_sweep", "draw_interaction_matrix",
    "run_curvature_sweep", "build_synthetic_image", "image_oracle_evaluate",
    "snap_superpixel_count", "run_resolution_sweep",
    "__version__",
]
