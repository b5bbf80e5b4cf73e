"""Synthetic scenes: ground-truth trajectories and noisy detections.

Stands in for a CNN detector. Each object owns an anchor embedding; its
detections scatter around the anchor, and displacement vectors point from the
current box center to the previous one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._ext import iou_matrix
from .assoc.features import CostFeatures, DetectionBatch, pairwise_features
from .assoc.hungarian import hungarian
from .core import EMBEDDING_DIM, BoundingBox, Detection, FrameDetections, boxes_to_array
from .errors import ConfigurationError
from .kalman.filter import (
    MULTI_FRAME,
    SINGLE_FRAME,
    NoiseModel,
    ObservationMode,
    effective_mode,
    initial_state,
    measurement_from_detection,
    transition_matrix,
)
from .kalman.filter import predict as kf_predict
from .kalman.filter import update as kf_update
from .tracker import KalmanTrack

MAX_ANCHOR_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_frames: int = 150
    fps: float = 30.0
    image_size: Tuple[int, int] = (1280, 720)
    n_objects: int = 5
    # per-object birth frame and lifespan (frames) drawn uniformly from these ranges
    birth_range: Tuple[int, int] = (0, 0)
    lifespan_range: Optional[Tuple[int, int]] = None
    # "random": uniform start positions and headings; "crossing": start on a
    # ring heading through the image center so paths cross repeatedly
    layout: str = "random"
    speed_range: Tuple[float, float] = (1.0, 4.0)  # px/frame
    size_range: Tuple[float, float] = (40.0, 120.0)  # box width, px
    aspect_range: Tuple[float, float] = (0.6, 1.6)  # h / w
    process_sigma: float = 0.05  # px/frame velocity random walk per frame
    measurement_sigma: float = 1.0  # px, per box corner coordinate
    miss_prob: float = 0.05
    fp_rate: float = 0.1
    n_classes: int = 3
    class_confusion_prob: float = 0.0
    embedding_beta: float = 1.0
    embedding_alpha: float = 0.2
    embedding_noise_sigma: float = 0.01
    displacement_noise_sigma: float = 0.3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("miss_prob", "class_confusion_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        for name in ("process_sigma", "measurement_sigma", "embedding_noise_sigma",
                     "displacement_noise_sigma", "fp_rate"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if not 0 <= self.embedding_alpha < self.embedding_beta:
            raise ConfigurationError("embedding_alpha must be non-negative and below embedding_beta")
        if self.n_frames < 1 or self.n_objects < 0 or self.fps <= 0 or self.n_classes < 1:
            raise ConfigurationError("n_frames, fps and n_classes must be positive")
        if self.layout not in ("random", "crossing"):
            raise ConfigurationError(f"unknown layout {self.layout!r}")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ConfigurationError("speed_range must be ordered and non-negative")
        if not 0 < self.size_range[0] <= self.size_range[1]:
            raise ConfigurationError("size_range must be ordered and positive")
        w, h = self.image_size
        if self.size_range[1] * max(1.0, self.aspect_range[1]) >= min(w, h):
            raise ConfigurationError("boxes must fit inside the image")

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    @property
    def embedding_noise_radius(self) -> float:
        """Norm beyond which detection embedding noise is re-drawn."""
        return 3.0 * self.embedding_noise_sigma * math.sqrt(EMBEDDING_DIM)

    @property
    def embeddings_within_margin(self) -> bool:
        """Whether every detection embedding lies closer than beta - alpha to
        its object's anchor."""
        return self.embedding_noise_radius < self.embedding_beta - self.embedding_alpha

    def with_updates(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class GtObject:
    object_id: int
    box: BoundingBox
    class_id: int


@dataclass(frozen=True)
class GtFrame:
    frame_index: int
    timestamp: float
    objects: Tuple[GtObject, ...]


@dataclass
class GroundTruth:
    frames: List[GtFrame]
    # generator-side bookkeeping, not written to files
    anchors: Optional[np.ndarray] = None

    def object_ids(self) -> List[int]:
        return sorted({o.object_id for f in self.frames for o in f.objects})


def _sample_anchors(rng: np.random.Generator, n: int, radius: float, min_sep: float) -> np.ndarray:
    anchors: List[np.ndarray] = []
    for _ in range(n):
        for _ in range(MAX_ANCHOR_ATTEMPTS):
            v = rng.normal(size=EMBEDDING_DIM)
            v *= radius / np.linalg.norm(v)
            if all(np.linalg.norm(v - a) >= min_sep for a in anchors):
                anchors.append(v)
                break
        else:
            raise ConfigurationError(
                f"could not place {n} anchor embeddings {min_sep:.3g} apart within {MAX_ANCHOR_ATTEMPTS} attempts"
            )
    return np.array(anchors).reshape(n, EMBEDDING_DIM)


def _bounded_noise(rng: np.random.Generator, sigma: float, radius: float) -> np.ndarray:
    if sigma == 0:
        return np.zeros(EMBEDDING_DIM)
    while True:
        v = rng.normal(0.0, sigma, size=EMBEDDING_DIM)
        if np.linalg.norm(v) < radius:
            return v


def _reflect(pos: float, vel: float, lo: float, hi: float) -> Tuple[float, float]:
    if pos < lo:
        return 2 * lo - pos, abs(vel)
    if pos > hi:
        return 2 * hi - pos, -abs(vel)
    return pos, vel


def _trajectories(cfg: ScenarioConfig, rng: np.random.Generator):
    """Per object: birth frame and a (life + 1, 4) array of (cx, cy, w, h),
    the first row being the state one frame before birth."""
    W, H = cfg.image_size
    out = []
    for k in range(cfg.n_objects):
        birth = int(rng.integers(cfg.birth_range[0], cfg.birth_range[1] + 1))
        if cfg.lifespan_range is None:
            life = cfg.n_frames - birth
        else:
            life = int(rng.integers(cfg.lifespan_range[0], cfg.lifespan_range[1] + 1))
        life = max(0, min(life, cfg.n_frames - birth))
        w = rng.uniform(*cfg.size_range)
        h = w * rng.uniform(*cfg.aspect_range)
        speed = rng.uniform(*cfg.speed_range)
        xlo, xhi = w / 2, W - w / 2
        ylo, yhi = h / 2, H - h / 2
        if cfg.layout == "crossing":
            ang = 2 * math.pi * (k + rng.uniform(-0.3, 0.3)) / max(cfg.n_objects, 1)
            rad = 0.4 * min(W, H)
            cx, cy = W / 2 + rad * math.cos(ang), H / 2 + rad * math.sin(ang)
            heading = ang + math.pi + rng.uniform(-0.25, 0.25)
        else:
            cx, cy = rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)
            heading = rng.uniform(0, 2 * math.pi)
        cx, cy = min(max(cx, xlo), xhi), min(max(cy, ylo), yhi)
        vx, vy = speed * math.cos(heading), speed * math.sin(heading)
        rows = [(cx, cy, w, h)]
        for _ in range(life):
            vx += rng.normal(0.0, cfg.process_sigma) if cfg.process_sigma else 0.0
            vy += rng.normal(0.0, cfg.process_sigma) if cfg.process_sigma else 0.0
            cx, vx = _reflect(cx + vx, vx, xlo, xhi)
            cy, vy = _reflect(cy + vy, vy, ylo, yhi)
            rows.append((cx, cy, w, h))
        out.append((birth, np.array(rows)))
    return out


def generate(cfg: ScenarioConfig) -> Tuple[GroundTruth, List[FrameDetections]]:
    """Generate ground truth and detections, deterministically from ``cfg.seed``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    W, H = cfg.image_size
    radius = cfg.embedding_beta + cfg.embedding_alpha
    anchors = _sample_anchors(rng, cfg.n_objects, radius, radius)
    classes = rng.integers(0, cfg.n_classes, size=cfg.n_objects)
    trajs = _trajectories(cfg, rng)
    noise_radius = cfg.embedding_noise_radius

    gt_frames: List[GtFrame] = []
    det_frames: List[FrameDetections] = []
    for f in range(cfg.n_frames):
        t = f / cfg.fps
        objs = []
        dets = []
        for k, (birth, rows) in enumerate(trajs):
            i = f - birth + 1
            if i < 1 or i >= len(rows):
                continue
            cx, cy, w, h = rows[i]
            box = BoundingBox(cx, cy, w, h)
            objs.append(GtObject(k + 1, box, int(classes[k])))
            if rng.random() < cfg.miss_prob:
                continue
            s = cfg.measurement_sigma
            x1, y1, x2, y2 = (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
            if s > 0:
                x1, y1, x2, y2 = np.array([x1, y1, x2, y2]) + rng.normal(0.0, s, size=4)
                if x2 - x1 < 1.0:
                    x1, x2 = cx - 0.5, cx + 0.5
                if y2 - y1 < 1.0:
                    y1, y2 = cy - 0.5, cy + 0.5
            dbox = BoundingBox.from_corners(float(x1), float(y1), float(x2), float(y2))
            pcx, pcy = rows[i - 1][0], rows[i - 1][1]
            disp = np.array([pcx - cx, pcy - cy])
            if cfg.displacement_noise_sigma > 0:
                disp = disp + rng.normal(0.0, cfg.displacement_noise_sigma, size=2)
            cls = int(classes[k])
            if cfg.n_classes > 1 and rng.random() < cfg.class_confusion_prob:
                cls = int((cls + rng.integers(1, cfg.n_classes)) % cfg.n_classes)
            emb = anchors[k] + _bounded_noise(rng, cfg.embedding_noise_sigma, noise_radius)
            dets.append(Detection(
                box=dbox,
                objectness=float(rng.uniform(0.5, 1.0)),
                class_id=cls,
                class_score=float(rng.uniform(0.5, 1.0)),
                embedding=tuple(float(e) for e in emb),
                displacement=(float(disp[0]), float(disp[1])),
            ))
        for _ in range(int(rng.poisson(cfg.fp_rate)) if cfg.fp_rate > 0 else 0):
            dets.append(_false_positive(cfg, rng, anchors, radius))
        order = rng.permutation(len(dets))
        gt_frames.append(GtFrame(f, t, tuple(objs)))
        det_frames.append(FrameDetections(f, t, tuple(dets[j] for j in order)))
    return GroundTruth(gt_frames, anchors), det_frames


def _false_positive(cfg: ScenarioConfig, rng: np.random.Generator, anchors: np.ndarray, radius: float) -> Detection:
    W, H = cfg.image_size
    w = rng.uniform(*cfg.size_range)
    h = w * rng.uniform(*cfg.aspect_range)
    cx = rng.uniform(w / 2, W - w / 2)
    cy = rng.uniform(h / 2, H - h / 2)
    for _ in range(MAX_ANCHOR_ATTEMPTS):
        v = rng.normal(size=EMBEDDING_DIM)
        v *= radius / np.linalg.norm(v)
        if anchors.size == 0 or np.min(np.linalg.norm(anchors - v, axis=1)) >= radius:
            break
    speed = 0.5 * (cfg.speed_range[0] + cfg.speed_range[1])
    disp = rng.normal(0.0, speed, size=2)
    return Detection(
        box=BoundingBox(float(cx), float(cy), float(w), float(h)),
        objectness=float(rng.uniform(0.5, 1.0)),
        class_id=int(rng.integers(0, cfg.n_classes)),
        class_score=float(rng.uniform(0.5, 1.0)),
        embedding=tuple(float(e) for e in v),
        displacement=(float(disp[0]), float(disp[1])),
    )


def sample_state_space(q_diag, r_diag, n_tracks: int, n_frames: int, fps: float, seed: int,
                       mode: ObservationMode = SINGLE_FRAME, dt_ref: Optional[float] = None):
    """Measurement sequences from the exact linear-Gaussian constant-velocity model.

    ``q_diag`` is the process noise per ``dt_ref`` (default one frame) in the
    filter's own units (px and px/s); ``r_diag`` has 4 or 6 entries. Returns
    ``(measurements, dts)`` pairs suitable for noise estimation.
    """
    rng = np.random.default_rng(seed)
    dt = 1.0 / fps
    dt_ref = dt if dt_ref is None else dt_ref
    q = np.asarray(q_diag, dtype=np.float64) * (dt / dt_ref)
    r = np.asarray(r_diag, dtype=np.float64)
    m = ObservationMode(mode).obs_dim
    if q.shape != (8,) or r.shape != (m,):
        raise ConfigurationError(f"need 8 process and {m} observation variances")
    F = transition_matrix(dt)
    seqs = []
    for _ in range(n_tracks):
        x = np.concatenate([rng.uniform(100, 1000, 2), rng.uniform(20, 120, 2),
                            rng.normal(0, 60, 2), rng.normal(0, 3, 2)])
        zs = np.empty((n_frames, m))
        for t in range(n_frames):
            if t > 0:
                x = F @ x + rng.normal(0.0, 1.0, 8) * np.sqrt(q)
            zs[t] = x[:m] + rng.normal(0.0, 1.0, m) * np.sqrt(r)
        seqs.append((zs, np.full(n_frames - 1, dt)))
    return seqs


@dataclass
class TrainingData:
    samples: list  # (CostFeatures, is_match) pairs
    sequences: list  # (measurements, dts) per object stretch
    # detection index -> object id (or None for false positives), per frame
    assignments: List[Dict[int, Optional[int]]] = field(default_factory=list)


def assign_detections(gt: GroundTruth, frames: Sequence[FrameDetections],
                      iou_threshold: float = 0.5) -> List[Dict[int, Optional[int]]]:
    """Map each detection to a ground-truth object by maximum-IoU assignment."""
    gt_by_frame = {f.frame_index: f for f in gt.frames}
    out = []
    for fr in frames:
        g = gt_by_frame.get(fr.frame_index)
        objs = list(g.objects) if g else []
        dets = list(fr.detections)
        amap: Dict[int, Optional[int]] = {j: None for j in range(len(dets))}
        if objs and dets:
            ious = iou_matrix(boxes_to_array([d.box for d in dets]), boxes_to_array([o.box for o in objs]))
            for j, i in hungarian(-ious, ious < iou_threshold):
                amap[j] = objs[i].object_id
        out.append(amap)
    return out


def make_training_data(gt: GroundTruth, frames: Sequence[FrameDetections],
                       noise: Optional[NoiseModel] = None,
                       mode: ObservationMode = SINGLE_FRAME,
                       max_unobserved: float = 0.5,
                       velocity_var_factor: float = 100.0,
                       iou_threshold: float = 0.5) -> TrainingData:
    """Labeled association pairs and per-object measurement sequences.

    Every ground-truth object is followed by an oracle track fed only its own
    detections, mirroring what the online tracker would hold. At each frame
    the track is predicted and paired with every detection: its own
    detection gives a positive sample, all others (other objects and false
    positives) negatives. The track restarts after gaps longer than
    ``max_unobserved``, like a deleted track would.

    Without a noise model only the measurement sequences are produced, which
    is what noise estimation needs first.
    """
    mode = ObservationMode(mode)
    frames = sorted(frames, key=lambda f: f.frame_index)
    assignments = assign_detections(gt, frames, iou_threshold)

    # measurement sequences, split where the tracker would have dropped the object
    by_obj: Dict[int, List[Tuple[float, np.ndarray]]] = {}
    prev_t: Optional[float] = None
    for fr, amap in zip(frames, assignments):
        dt = None if prev_t is None else fr.timestamp - prev_t
        prev_t = fr.timestamp
        for j, oid in amap.items():
            if oid is None:
                continue
            det = fr.detections[j]
            if mode is MULTI_FRAME:
                if det.displacement is None or not dt:
                    continue
                z = np.array([det.box.cx, det.box.cy, det.box.w, det.box.h,
                              -det.displacement[0] / dt, -det.displacement[1] / dt])
            else:
                z = det.box.as_array()
            by_obj.setdefault(oid, []).append((fr.timestamp, z))
    sequences = []
    for oid in sorted(by_obj):
        stretch: List[Tuple[float, np.ndarray]] = []
        for t, z in by_obj[oid] + [(np.inf, None)]:
            if stretch and t - stretch[-1][0] > max_unobserved + 1e-9:
                if len(stretch) >= 3:
                    ts = np.array([s[0] for s in stretch])
                    sequences.append((np.array([s[1] for s in stretch]), np.diff(ts)))
                stretch = []
            if z is not None:
                stretch.append((t, z))

    samples = []
    if noise is not None:
        tracks: Dict[int, KalmanTrack] = {}
        prev_t = None
        for fr, amap in zip(frames, assignments):
            t = fr.timestamp
            dt = None if prev_t is None else t - prev_t
            prev_t = t
            dets = list(fr.detections)
            for oid in list(tracks):
                if t - tracks[oid].last_observed > max_unobserved + 1e-9:
                    del tracks[oid]
            live = sorted(tracks)
            if dt is not None:
                for oid in live:
                    tracks[oid].state = kf_predict(tracks[oid].state, dt, noise)
            if live and dets:
                batch = DetectionBatch(dets, mode, dt)
                mats = pairwise_features([tracks[o] for o in live], batch, noise)
                for a, oid in enumerate(live):
                    for j in range(len(dets)):
                        d = mats["D"][a, j]
                        f = CostFeatures(
                            embedding_dist=float(mats["E"][a, j]),
                            mahalanobis_dist=float(mats["KF"][a, j]),
                            class_cost=int(mats["C"][a, j]),
                            displacement_dist=None if np.isnan(d) else float(d),
                        )
                        samples.append((f, amap[j] == oid))
            for j, oid in amap.items():
                if oid is None:
                    continue
                det = dets[j]
                dt_eff = dt if dt is not None else 1.0 / 30.0
                m = effective_mode(det, mode, dt_eff)
                z = measurement_from_detection(det, m, dt_eff)
                if oid in tracks:
                    tr = tracks[oid]
                    tr.state = kf_update(tr.state, z, m, noise)
                    tr.observe(det, t)
                else:
                    tr = KalmanTrack(oid, initial_state(z, m, noise, velocity_var_factor), det.class_id, t,
                                     (det.box.cx, det.box.cy))
                    tr.embedding_memory.append(det.embedding)
                    tracks[oid] = tr
    return TrainingData(samples, sequences, assignments)
