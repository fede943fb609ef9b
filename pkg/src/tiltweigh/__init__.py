"""Exponential-tilt importance weighting between a labeled source sample and
an unlabeled target sample.

Workflow: fit a calibrated source classifier, fit the tilt against the
unlabeled target to obtain per-sample importance weights, then use the
weights to estimate target performance, fine-tune by weighted ERM, or score
a model zoo for selection. Synthetic generators and an exact discrete oracle
provide ground truth for verification.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .classifier import CalibrationTransform, ProbClassifier, calibrate, fit_logistic
from .data import (
    LabeledDataset,
    SplitSpec,
    SufficientStatistic,
    UnlabeledDataset,
    load_labeled,
    load_unlabeled,
    mix_target_into_source,
    save_labeled,
    save_unlabeled,
    split,
)
from .downstream import (
    ModelScoreRow,
    build_model_zoo,
    evaluate_target,
    finetune,
    score_models,
    weighted_expectation,
)
from .evaluation import ConsistencyTable, PrCurve, consistency_curve, per_class_pr, precision_recall
from .numerics import AdamState, adam_step, log_sum_exp, softmax, spearman, substream
from .synthetic import (
    DiscreteShiftSpec,
    GaussianLdaSpec,
    check_anchor_sets,
    gen_group_shift,
    gen_label_shift,
    gen_lda,
    label_switch_twin_spec,
    make_discrete_spec,
    oracle_solve,
)
from .tilt import ExtraConfig, TiltModel, WeightVector, fit_extra, objective_terms, sweep

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CalibrationTransform",
    "ConsistencyTable",
    "DiscreteShiftSpec",
    "ExtraConfig",
    "GaussianLdaSpec",
    "KERNEL_BACKEND",
    "LabeledDataset",
    "ModelScoreRow",
    "PrCurve",
    "ProbClassifier",
    "SplitSpec",
    "SufficientStatistic",
    "TiltModel",
    "UnlabeledDataset",
    "WeightVector",
    "adam_step",
    "build_model_zoo",
    "calibrate",
    "check_anchor_sets",
    "consistency_curve",
    "evaluate_target",
    "finetune",
    "fit_extra",
    "fit_logistic",
    "gen_group_shift",
    "gen_label_shift",
    "gen_lda",
    "label_switch_twin_spec",
    "load_labeled",
    "load_unlabeled",
    "log_sum_exp",
    "make_discrete_spec",
    "mix_target_into_source",
    "objective_terms",
    "oracle_solve",
    "per_class_pr",
    "precision_recall",
    "save_labeled",
    "save_unlabeled",
    "score_models",
    "softmax",
    "spearman",
    "split",
    "substream",
    "sweep",
    "weighted_expectation",
]
