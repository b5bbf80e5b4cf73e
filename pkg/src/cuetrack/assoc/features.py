"""Pairwise association costs between predicted tracks and detections."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..core import Detection, l2_distance
from ..errors import ConfigurationError, DataError
from ..kalman.filter import (
    MULTI_FRAME,
    NoiseModel,
    ObservationMode,
    mahalanobis,
    measurement_from_detection,
)

# canonical feature order; a feature set is any subset, kept in this order
FEATURE_ORDER = ("E", "D", "KF", "C")
FEATURE_FIELDS = {
    "E": "embedding_dist",
    "D": "displacement_dist",
    "KF": "mahalanobis_dist",
    "C": "class_cost",
}


def parse_feature_set(spec) -> tuple:
    """Normalize ``"C,KF,E"`` or an iterable of names to the canonical tuple."""
    if isinstance(spec, str):
        names = [s.strip().upper() for s in spec.replace("+", ",").split(",") if s.strip()]
    else:
        names = [str(s).strip().upper() for s in spec]
    unknown = set(names) - set(FEATURE_ORDER)
    if unknown:
        raise ConfigurationError(f"unknown features: {sorted(unknown)}")
    if not set(names) & {"KF", "E", "D"}:
        raise ConfigurationError("feature set must include at least one of KF, E, D")
    return tuple(f for f in FEATURE_ORDER if f in names)


def mode_for_features(features: Sequence[str]) -> ObservationMode:
    """Displacement vectors come from the two-frame detector, which also lets the
    filter observe velocity."""
    return ObservationMode.MULTI_FRAME if "D" in features else ObservationMode.SINGLE_FRAME


@dataclass(frozen=True)
class CostFeatures:
    embedding_dist: float
    mahalanobis_dist: float
    class_cost: float
    displacement_dist: Optional[float] = None

    def __post_init__(self):
        if self.class_cost not in (0, 1):
            raise DataError("class_cost must be 0 or 1")
        for name in ("embedding_dist", "mahalanobis_dist", "displacement_dist"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise DataError(f"{name} must be finite and non-negative, got {v}")

    def vector(self, features: Sequence[str]) -> np.ndarray:
        out = []
        for f in features:
            v = getattr(self, FEATURE_FIELDS[f])
            if v is None:
                raise DataError(f"feature {f} is not available for this pair")
            out.append(float(v))
        return np.array(out, dtype=np.float64)


def cost_features(track, det: Detection, dt: float, noise: NoiseModel,
                  mode: ObservationMode = ObservationMode.SINGLE_FRAME) -> CostFeatures:
    """Costs for one (predicted track, detection) pair.

    ``track`` needs ``state``, ``embedding_memory``, ``class_id`` and
    ``last_center``.
    """
    memory = list(track.embedding_memory)
    if not memory:
        raise DataError("track has an empty embedding memory")
    emb = min(l2_distance(m, det.embedding) for m in memory)
    disp = None
    if det.displacement is not None:
        back = np.array([det.box.cx + det.displacement[0], det.box.cy + det.displacement[1]])
        disp = float(np.hypot(*(np.asarray(track.last_center, dtype=np.float64) - back)))
    maha = mahalanobis(track.state, det, mode, noise, dt)
    cls = 0 if det.class_id == track.class_id else 1
    return CostFeatures(emb, maha, cls, disp)


class DetectionBatch:
    """Column-stacked detection arrays for vectorized cost computation."""

    def __init__(self, detections: Sequence[Detection], mode: ObservationMode, dt: Optional[float]):
        self.n = len(detections)
        self.boxes = np.array([[d.box.cx, d.box.cy, d.box.w, d.box.h] for d in detections],
                              dtype=np.float64).reshape(-1, 4)
        self.embeddings = np.array([d.embedding for d in detections], dtype=np.float64).reshape(-1, 32)
        self.class_ids = np.array([d.class_id for d in detections], dtype=np.int64)
        self.has_disp = np.array([d.displacement is not None for d in detections], dtype=bool)
        disp = np.zeros((self.n, 2))
        for i, d in enumerate(detections):
            if d.displacement is not None:
                disp[i] = d.displacement
        self.displacements = disp
        self.use_velocity = self.has_disp & (ObservationMode(mode) is MULTI_FRAME) & bool(dt)
        self.velocity = -disp / dt if dt else np.zeros_like(disp)


def pairwise_features(tracks: Sequence, dets: DetectionBatch, noise: NoiseModel) -> dict:
    """All four cost matrices (tracks x detections) at once.

    Matches :func:`cost_features` entry by entry; ``displacement_dist`` is
    ``nan`` where a detection has no displacement.
    """
    n, m = len(tracks), dets.n
    emb = np.zeros((n, m))
    disp = np.full((n, m), np.nan)
    maha = np.zeros((n, m))
    cls = np.zeros((n, m))
    if n == 0 or m == 0:
        return {"E": emb, "D": disp, "KF": maha, "C": cls}

    back = dets.boxes[:, :2] + dets.displacements
    r4 = noise.obs_r_single
    r6 = noise.obs_r_multi
    for i, tr in enumerate(tracks):
        mem = np.asarray(tr.embedding_memory, dtype=np.float64)
        if mem.size == 0:
            raise DataError("track has an empty embedding memory")
        diff = mem[:, None, :] - dets.embeddings[None, :, :]
        emb[i] = np.sqrt(np.einsum("kmj,kmj->km", diff, diff).min(axis=0))
        lc = np.asarray(tr.last_center, dtype=np.float64)
        dd = np.hypot(lc[0] - back[:, 0], lc[1] - back[:, 1])
        disp[i] = np.where(dets.has_disp, dd, np.nan)
        cls[i] = (dets.class_ids != tr.class_id).astype(np.float64)

        mean, cov = tr.state.mean, tr.state.covariance
        y4 = dets.boxes - mean[:4]
        maha[i] = _maha_rows(y4, cov[:4, :4] + r4)
        if dets.use_velocity.any():
            sel = dets.use_velocity
            y6 = np.concatenate([y4[sel], dets.velocity[sel] - mean[4:6]], axis=1)
            maha[i, sel] = _maha_rows(y6, cov[:6, :6] + r6)
    return {"E": emb, "D": disp, "KF": maha, "C": cls}


def _maha_rows(y: np.ndarray, s: np.ndarray) -> np.ndarray:
    s = 0.5 * (s + s.T)
    chol = np.linalg.cholesky(s)
    w = np.linalg.solve(chol, y.T)
    return np.sqrt(np.einsum("ij,ij->j", w, w))


def feature_tensor(mats: dict, features: Sequence[str]) -> np.ndarray:
    """Stack selected cost matrices into an (n, m, k) array."""
    return np.stack([mats[f] for f in features], axis=-1)
