"""Linear SVM fusing the association costs into one signed match score."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError, DimensionError, TrainingError
from .features import CostFeatures

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvmModel:
    """Hyperplane in standardized feature space.

    Positive scores mean "detection belongs to the track".
    """

    features: Tuple[str, ...]
    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_scales: np.ndarray

    def __post_init__(self):
        k = len(self.features)
        for name in ("weights", "feature_means", "feature_scales"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if arr.size != k:
                raise DimensionError(f"{name} must have {k} entries, got {arr.size}")
            object.__setattr__(self, name, arr)
        if np.any(self.feature_scales <= 0):
            raise DataError("feature scales must be positive")
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "bias", float(self.bias))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_means) / self.feature_scales

    def decision(self, x: np.ndarray) -> np.ndarray:
        """Scores for raw feature rows; ``x`` has the model's features on its last axis."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != len(self.features):
            raise DimensionError(f"expected {len(self.features)} features, got {x.shape[-1]}")
        return self.standardize(x) @ self.weights + self.bias


def svm_score(model: SvmModel, f) -> float:
    """Signed distance-like score ``w . standardize(f) + b``.

    ``f`` may be a :class:`CostFeatures` or a raw vector in the model's layout.
    """
    x = f.vector(model.features) if isinstance(f, CostFeatures) else np.asarray(f, dtype=np.float64)
    if x.shape != (len(model.features),):
        raise DimensionError(f"feature layout mismatch: expected {len(model.features)} values")
    return float(model.decision(x))


@dataclass
class SvmTrainingLog:
    objectives: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)


def hinge_objective(w, b, x, y, sample_weight, reg_c) -> float:
    margins = y * (x @ w + b)
    loss = np.maximum(0.0, 1.0 - margins)
    return 0.5 * float(w @ w) + reg_c * float(sample_weight @ loss)


def svm_train(samples, reg_c: float = 1.0, epochs: int = 200, seed: int = 0,
              features: Optional[Sequence[str]] = None, class_weight: str = "balanced",
              log: Optional[SvmTrainingLog] = None) -> SvmModel:
    """Train the gate classifier by subgradient descent on the L2-regularized hinge loss.

    ``samples`` is a sequence of ``(features, label)`` pairs where features are
    :class:`CostFeatures` (then ``features`` selects the layout) or raw
    vectors, and labels are booleans (``True`` = match). The loss is a
    weighted sum over samples; with ``class_weight="balanced"`` each class
    carries total weight ``n / 2``, so ``reg_c`` has its usual primal meaning. Every epoch takes one full-batch
    subgradient step; a step is accepted only if it does not increase the
    objective, otherwise the step size is halved.
    """
    if reg_c <= 0:
        raise DataError("reg_c must be positive")
    if not samples:
        raise TrainingError("no training samples")
    feats, labels = zip(*samples)
    if isinstance(feats[0], CostFeatures):
        if features is None:
            raise DataError("a feature layout is required for CostFeatures samples")
        x = np.array([f.vector(features) for f in feats], dtype=np.float64)
    else:
        x = np.array(feats, dtype=np.float64)
        if features is None:
            raise DataError("a feature layout is required")
    features = tuple(features)
    if x.ndim != 2 or x.shape[1] != len(features):
        raise DimensionError("feature rows do not match the layout")
    if not np.all(np.isfinite(x)):
        raise DataError("features must be finite")
    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    n_pos = int((y > 0).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("training data must contain both matches and non-matches")

    means = x.mean(axis=0)
    scales = x.std(axis=0)
    scales = np.where(scales > 1e-12, scales, 1.0)
    xs = (x - means) / scales

    if class_weight == "balanced":
        sw = np.where(y > 0, 0.5 * y.size / n_pos, 0.5 * y.size / n_neg)
    elif class_weight == "none":
        sw = np.ones(y.size)
    else:
        raise ValueError(f"unknown class_weight {class_weight!r}")

    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1e-3, size=xs.shape[1])
    b = 0.0
    obj = hinge_objective(w, b, xs, y, sw, reg_c)
    step = 1.0
    log = log if log is not None else SvmTrainingLog()
    log.objectives.append(obj)
    for _ in range(epochs):
        active = (y * (xs @ w + b)) < 1.0
        coef = -reg_c * sw * y * active
        gw = w + coef @ xs
        gb = float(coef.sum())
        for _ in range(40):
            w_new = w - step * gw
            b_new = b - step * gb
            new_obj = hinge_objective(w_new, b_new, xs, y, sw, reg_c)
            if new_obj <= obj:
                break
            step *= 0.5
        else:
            log.objectives.append(obj)
            log.steps.append(0.0)
            continue
        w, b, obj = w_new, b_new, new_obj
        log.objectives.append(obj)
        log.steps.append(step)
        step = min(step * 1.5, 10.0)
    logger.debug("svm: objective %.6g after %d epochs", obj, epochs)
    return SvmModel(features, w, b, means, scales)


def accuracy(model: SvmModel, x: np.ndarray, labels) -> float:
    pred = model.decision(np.asarray(x, dtype=np.float64)) > 0
    return float(np.mean(pred == np.asarray(labels, dtype=bool)))
