"""Online tracker: predict, associate, update, and manage track lifecycles."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np

from .assoc.associate import associate
from .assoc.svm import SvmModel
from .core import STABLE, TENTATIVE, BoundingBox, Detection, FrameDetections, TrackOutput
from .errors import ConfigurationError, SequencingError
from .kalman.filter import (
    KalmanState,
    NoiseModel,
    ObservationMode,
    effective_mode,
    initial_state,
    measurement_from_detection,
    predict,
    update,
)

EMBEDDING_MEMORY = 10
# guards the deletion threshold against timestamp rounding (t = k / fps)
TIME_EPS = 1e-9
MIN_BOX_SIDE = 1e-3


@dataclass
class KalmanTrack:
    id: int
    state: KalmanState
    class_id: int
    last_observed: float
    last_center: Tuple[float, float]
    embedding_memory: Deque[Tuple[float, ...]] = field(default_factory=lambda: deque(maxlen=EMBEDDING_MEMORY))
    status: str = TENTATIVE
    consecutive_hits: int = 1
    updated: bool = True

    def observe(self, det: Detection, timestamp: float) -> None:
        self.embedding_memory.append(det.embedding)
        self.class_id = det.class_id
        self.last_observed = timestamp
        self.last_center = (det.box.cx, det.box.cy)

    def output_box(self) -> BoundingBox:
        cx, cy, w, h = self.state.mean[:4]
        return BoundingBox(float(cx), float(cy), float(max(w, MIN_BOX_SIDE)), float(max(h, MIN_BOX_SIDE)))


@dataclass(frozen=True)
class TrackerConfig:
    noise: NoiseModel
    svm: SvmModel
    mode: ObservationMode = ObservationMode.SINGLE_FRAME
    dt_ref: float = 1.0 / 30.0
    stable_hits: int = 3
    max_unobserved: float = 0.5
    emit_tentative: bool = False
    # also emit stable tracks that were not matched in the current frame
    emit_coasting: bool = True
    velocity_var_factor: float = 100.0

    def __post_init__(self):
        if self.stable_hits < 1:
            raise ConfigurationError("stable_hits must be >= 1")
        if not self.max_unobserved > 0:
            raise ConfigurationError("max_unobserved must be positive")
        object.__setattr__(self, "mode", ObservationMode(self.mode))


class Tracker:
    def __init__(self, config: TrackerConfig):
        self.config = config
        self.tracks: List[KalmanTrack] = []
        self.next_id = 1
        self.last_timestamp: Optional[float] = None

    def _new_track(self, det: Detection, timestamp: float, dt: Optional[float]) -> KalmanTrack:
        cfg = self.config
        # first frame of a sequence has no elapsed time; displacement needs one
        dt_eff = dt if dt is not None else cfg.dt_ref
        mode = effective_mode(det, cfg.mode, dt_eff)
        z = measurement_from_detection(det, mode, dt_eff)
        track = KalmanTrack(
            id=self.next_id,
            state=initial_state(z, mode, cfg.noise, cfg.velocity_var_factor),
            class_id=det.class_id,
            last_observed=timestamp,
            last_center=(det.box.cx, det.box.cy),
        )
        track.embedding_memory.append(det.embedding)
        self.next_id += 1
        return track

    def step(self, frame: FrameDetections) -> List[TrackOutput]:
        cfg = self.config
        t = frame.timestamp
        if self.last_timestamp is not None and not t > self.last_timestamp:
            raise SequencingError(
                f"frame {frame.frame_index}: timestamp {t} does not follow {self.last_timestamp}"
            )
        dt = None if self.last_timestamp is None else t - self.last_timestamp

        if dt is not None:
            for tr in self.tracks:
                tr.state = predict(tr.state, dt, cfg.noise)

        dets = list(frame.detections)
        result = associate(self.tracks, dets, cfg.svm, dt, cfg.noise, cfg.mode)

        for tr in self.tracks:
            tr.updated = False
        for ti, di, _ in result.matches:
            tr = self.tracks[ti]
            det = dets[di]
            mode = effective_mode(det, cfg.mode, dt)
            tr.state = update(tr.state, measurement_from_detection(det, mode, dt), mode, cfg.noise)
            tr.observe(det, t)
            tr.consecutive_hits += 1
            tr.updated = True
        for ti in result.unmatched_tracks:
            self.tracks[ti].consecutive_hits = 0
        new_tracks = [self._new_track(dets[di], t, dt) for di in result.unmatched_detections]

        survivors = []
        for tr in self.tracks:
            if t - tr.last_observed > cfg.max_unobserved + TIME_EPS:
                continue
            survivors.append(tr)
        self.tracks = survivors + new_tracks
        for tr in self.tracks:
            if tr.consecutive_hits >= cfg.stable_hits:
                tr.status = STABLE
        self.last_timestamp = t

        out = []
        for tr in sorted(self.tracks, key=lambda tr: tr.id):
            if tr.status == STABLE:
                if not (tr.updated or cfg.emit_coasting):
                    continue
            elif not (cfg.emit_tentative and tr.updated):
                continue
            out.append(TrackOutput(frame.frame_index, tr.id, tr.output_box(), tr.class_id, tr.status))
        return out


def run_sequence(frames: Sequence[FrameDetections], config: TrackerConfig) -> List[TrackOutput]:
    tracker = Tracker(config)
    out: List[TrackOutput] = []
    for frame in frames:
        out.extend(tracker.step(frame))
    return out
