"""Line-oriented text formats for detections, ground truth, tracks, reports and models.

Every record is one JSON object on its own line. Reals are written with 9
significant digits, so any value already representable that way survives a
write/parse cycle unchanged. A record holding only ``frame`` and ``time``
marks a frame without boxes.
"""
from __future__ import annotations

import json
import math
from dataclasses import fields
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .assoc.features import parse_feature_set
from .assoc.svm import SvmModel
from .core import EMBEDDING_DIM, BoundingBox, Detection, FrameDetections, TrackOutput
from .errors import CuetrackError, ParseError, SchemaError
from .kalman.filter import NoiseModel, ObservationMode
from .metrics import MotReport
from .simulator import GroundTruth, GtFrame, GtObject

SIG_DIGITS = 9
BOX_KEYS = ("cx", "cy", "w", "h")


def q9(x: float) -> float:
    """Round to the precision written to files."""
    return float(f"{float(x):.{SIG_DIGITS}g}")


def _dump(record: Dict[str, Any]) -> str:
    return json.dumps(record, separators=(", ", ": "), allow_nan=False)


def _write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _records(path) -> Iterator[Tuple[int, Dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed record: {exc.msg}", line=lineno) from None
            if not isinstance(rec, dict):
                raise ParseError("record must be an object", line=lineno)
            yield lineno, rec


def _get(rec: Dict[str, Any], key: str, kind, lineno: int):
    if key not in rec:
        raise ParseError(f"missing field {key!r}", line=lineno)
    v = rec[key]
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParseError(f"field {key!r} must be an integer", line=lineno)
        return v
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"field {key!r} must be a finite number", line=lineno)
        return float(v)
    if kind is str:
        if not isinstance(v, str):
            raise ParseError(f"field {key!r} must be a string", line=lineno)
        return v
    raise TypeError(kind)


def _vector(rec, key: str, n: int, lineno: int) -> Tuple[float, ...]:
    v = rec.get(key)
    if not isinstance(v, list):
        raise ParseError(f"field {key!r} must be a list", line=lineno)
    if len(v) != n:
        raise SchemaError(f"field {key!r} must have {n} entries, got {len(v)}", line=lineno)
    return tuple(_get({key: x}, key, float, lineno) for x in v)


def _box(rec, lineno: int) -> BoundingBox:
    vals = [_get(rec, k, float, lineno) for k in BOX_KEYS]
    try:
        return BoundingBox(*vals)
    except CuetrackError as exc:
        raise SchemaError(str(exc), line=lineno) from None


def _box_fields(box: BoundingBox) -> Dict[str, float]:
    return {k: q9(getattr(box, k)) for k in BOX_KEYS}


def _is_marker(rec) -> bool:
    return set(rec) == {"frame", "time"}


class _FrameGrouper:
    """Collects records into frames, enforcing ascending frame index and time."""

    def __init__(self):
        self.frames: List[Tuple[int, float, list]] = []

    def add(self, frame: int, time: float, lineno: int) -> list:
        if self.frames:
            last_frame, last_time, items = self.frames[-1]
            if frame == last_frame:
                if time != last_time:
                    raise ParseError(f"frame {frame} has conflicting times", line=lineno)
                return items
            if frame < last_frame or time <= last_time:
                raise ParseError("records must be grouped by frame in ascending time", line=lineno)
        items: list = []
        self.frames.append((frame, time, items))
        return items


# detections

def detection_record(frame: int, time: float, det: Detection) -> Dict[str, Any]:
    rec: Dict[str, Any] = {"frame": int(frame), "time": q9(time)}
    rec.update(_box_fields(det.box))
    rec["objectness"] = q9(det.objectness)
    rec["class_id"] = int(det.class_id)
    rec["class_score"] = q9(det.class_score)
    rec["embedding"] = [q9(x) for x in det.embedding]
    if det.displacement is not None:
        rec["displacement"] = [q9(x) for x in det.displacement]
    return rec


def write_detections(path, frames: Sequence[FrameDetections]) -> None:
    lines = []
    for fr in frames:
        if not fr.detections:
            lines.append(_dump({"frame": int(fr.frame_index), "time": q9(fr.timestamp)}))
        for det in fr.detections:
            lines.append(_dump(detection_record(fr.frame_index, fr.timestamp, det)))
    _write_lines(path, lines)


def parse_detections(path) -> List[FrameDetections]:
    grouper = _FrameGrouper()
    for lineno, rec in _records(path):
        items = grouper.add(_get(rec, "frame", int, lineno), _get(rec, "time", float, lineno), lineno)
        if _is_marker(rec):
            continue
        box = _box(rec, lineno)
        emb = _vector(rec, "embedding", EMBEDDING_DIM, lineno)
        disp = _vector(rec, "displacement", 2, lineno) if rec.get("displacement") is not None else None
        try:
            det = Detection(box, _get(rec, "objectness", float, lineno), _get(rec, "class_id", int, lineno),
                            _get(rec, "class_score", float, lineno), emb, disp)
        except CuetrackError as exc:
            raise SchemaError(str(exc), line=lineno) from None
        items.append(det)
    return [FrameDetections(f, t, tuple(items)) for f, t, items in grouper.frames]


# ground truth

def write_ground_truth(path, gt: GroundTruth) -> None:
    lines = []
    for fr in gt.frames:
        if not fr.objects:
            lines.append(_dump({"frame": int(fr.frame_index), "time": q9(fr.timestamp)}))
        for o in fr.objects:
            rec: Dict[str, Any] = {"frame": int(fr.frame_index), "time": q9(fr.timestamp),
                                   "object_id": int(o.object_id)}
            rec.update(_box_fields(o.box))
            rec["class_id"] = int(o.class_id)
            lines.append(_dump(rec))
    _write_lines(path, lines)


def parse_ground_truth(path) -> GroundTruth:
    grouper = _FrameGrouper()
    for lineno, rec in _records(path):
        items = grouper.add(_get(rec, "frame", int, lineno), _get(rec, "time", float, lineno), lineno)
        if _is_marker(rec):
            continue
        items.append(GtObject(_get(rec, "object_id", int, lineno), _box(rec, lineno),
                              _get(rec, "class_id", int, lineno)))
    return GroundTruth([GtFrame(f, t, tuple(items)) for f, t, items in grouper.frames])


# tracks

def write_tracks(path, tracks: Sequence[TrackOutput]) -> None:
    lines = []
    for tr in tracks:
        rec: Dict[str, Any] = {"frame": int(tr.frame_index), "track_id": int(tr.track_id)}
        rec.update(_box_fields(tr.box))
        rec["class_id"] = int(tr.class_id)
        rec["status"] = tr.status
        lines.append(_dump(rec))
    _write_lines(path, lines)


def parse_tracks(path) -> List[TrackOutput]:
    out: List[TrackOutput] = []
    for lineno, rec in _records(path):
        frame = _get(rec, "frame", int, lineno)
        if out and frame < out[-1].frame_index:
            raise ParseError("track records must be in ascending frame order", line=lineno)
        out.append(TrackOutput(frame, _get(rec, "track_id", int, lineno), _box(rec, lineno),
                               _get(rec, "class_id", int, lineno), _get(rec, "status", str, lineno)))
    return out


# reports

_INT_REPORT_FIELDS = {f.name for f in fields(MotReport) if f.type in (int, "int")}


def write_report(path, report: MotReport) -> None:
    rec = {k: (int(v) if k in _INT_REPORT_FIELDS else q9(v)) for k, v in report.as_dict().items()}
    _write_lines(path, [_dump(rec)])


def parse_report(path) -> MotReport:
    recs = list(_records(path))
    if len(recs) != 1:
        raise ParseError("report file must hold exactly one record")
    lineno, rec = recs[0]
    kw = {f.name: _get(rec, f.name, int if f.name in _INT_REPORT_FIELDS else float, lineno)
          for f in fields(MotReport)}
    return MotReport(**kw)


# model bundle
# Model parameters are written at full double precision so a loaded model
# tracks exactly like the one held in memory after fitting.

def write_model(path, features: Sequence[str], mode: ObservationMode, noise: NoiseModel,
                svm: SvmModel) -> None:
    rec = {
        "features": list(parse_feature_set(features)),
        "mode": ObservationMode(mode).value,
        "dt_ref": float(noise.dt_ref),
        "process_q": noise.process_q.tolist(),
        "obs_r_single": noise.obs_r_single.tolist(),
        "obs_r_multi": noise.obs_r_multi.tolist(),
        "svm_features": list(svm.features),
        "svm_weights": svm.weights.tolist(),
        "svm_bias": float(svm.bias),
        "svm_means": svm.feature_means.tolist(),
        "svm_scales": svm.feature_scales.tolist(),
    }
    _write_lines(path, [_dump(rec)])


def parse_model(path):
    """Return ``(features, mode, noise, svm)`` from a model file."""
    recs = list(_records(path))
    if len(recs) != 1:
        raise ParseError("model file must hold exactly one record")
    lineno, rec = recs[0]
    try:
        features = parse_feature_set(rec["features"])
        mode = ObservationMode(rec["mode"])
        noise = NoiseModel(np.array(rec["process_q"], dtype=np.float64),
                           np.array(rec["obs_r_single"], dtype=np.float64),
                           np.array(rec["obs_r_multi"], dtype=np.float64),
                           float(rec["dt_ref"]))
        svm = SvmModel(tuple(rec["svm_features"]), np.array(rec["svm_weights"], dtype=np.float64),
                       float(rec["svm_bias"]), np.array(rec["svm_means"], dtype=np.float64),
                       np.array(rec["svm_scales"], dtype=np.float64))
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}", line=lineno) from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), line=lineno) from None
    except CuetrackError as exc:
        raise SchemaError(str(exc), line=lineno) from None
    if svm.features != features:
        raise SchemaError("svm features do not match the model feature set", line=lineno)
    return features, mode, noise, svm


def infer_fps(frames: Sequence, default: Optional[float] = None) -> float:
    """Frame rate from the median timestamp spacing, rounded to 1e-3 Hz.

    The rounding undoes the 9-digit quantization of written timestamps.
    """
    t = np.array([f.timestamp for f in frames], dtype=np.float64)
    if t.size < 2:
        if default is None:
            raise ParseError("need at least two frames to infer the frame rate")
        return default
    step = float(np.median(np.diff(t)))
    if not step > 0:
        raise ParseError("frame timestamps must increase")
    return round(1.0 / step, 3)
