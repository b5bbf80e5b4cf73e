from .associate import Assignment, associate, score_matrix
from .features import (
    FEATURE_ORDER,
    CostFeatures,
    DetectionBatch,
    cost_features,
    feature_tensor,
    mode_for_features,
    pairwise_features,
    parse_feature_set,
)
from .hungarian import assignment_cost, hungarian
from .svm import SvmModel, SvmTrainingLog, accuracy, hinge_objective, svm_score, svm_train

__all__ = [
    "Assignment",
    "associate",
    "score_matrix",
    "FEATURE_ORDER",
    "CostFeatures",
    "DetectionBatch",
    "cost_features",
    "feature_tensor",
    "mode_for_features",
    "pairwise_features",
    "parse_feature_set",
    "assignment_cost",
    "hungarian",
    "SvmModel",
    "SvmTrainingLog",
    "accuracy",
    "hinge_objective",
    "svm_score",
    "svm_train",
]
