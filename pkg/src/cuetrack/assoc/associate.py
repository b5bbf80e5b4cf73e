"""Gate, score and assign detections to predicted tracks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core import Detection
from ..kalman.filter import NoiseModel, ObservationMode
from .features import DetectionBatch, feature_tensor, pairwise_features
from .hungarian import hungarian
from .svm import SvmModel


@dataclass
class Assignment:
    matches: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_detections: List[int] = field(default_factory=list)


def score_matrix(tracks: Sequence, detections: Sequence[Detection], model: SvmModel, dt: Optional[float],
                 noise: NoiseModel, mode: ObservationMode) -> np.ndarray:
    """SVM scores for every (track, detection) pair.

    Pairs lacking a feature the model needs (a displacement for ``D``) get
    ``-inf`` and can never be matched.
    """
    n, m = len(tracks), len(detections)
    if n == 0 or m == 0:
        return np.zeros((n, m))
    batch = DetectionBatch(detections, mode, dt)
    mats = pairwise_features(tracks, batch, noise)
    x = feature_tensor(mats, model.features)
    scores = model.decision(np.nan_to_num(x, nan=0.0))
    missing = np.isnan(x).any(axis=-1)
    return np.where(missing, -np.inf, scores)


def associate(tracks: Sequence, detections: Sequence[Detection], model: SvmModel, dt: Optional[float],
              noise: NoiseModel, mode: ObservationMode = ObservationMode.SINGLE_FRAME) -> Assignment:
    """Pairs with a non-positive score are forbidden; the rest are assigned by
    minimizing the summed negated scores."""
    n, m = len(tracks), len(detections)
    scores = score_matrix(tracks, detections, model, dt, noise, mode)
    forbidden = ~(scores > 0.0)
    pairs = hungarian(np.where(forbidden, 0.0, -scores), forbidden) if n and m else []
    matched_t = {i for i, _ in pairs}
    matched_d = {j for _, j in pairs}
    return Assignment(
        matches=[(i, j, float(-scores[i, j])) for i, j in pairs],
        unmatched_tracks=[i for i in range(n) if i not in matched_t],
        unmatched_detections=[j for j in range(m) if j not in matched_d],
    )
