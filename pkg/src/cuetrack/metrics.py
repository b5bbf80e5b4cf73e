"""CLEAR MOT evaluation: MOTA, MOTP, error ratios and track coverage."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from ._ext import iou_matrix
from .assoc.hungarian import hungarian
from .core import TrackOutput, boxes_to_array
from .errors import DataError

MOSTLY_TRACKED = 0.8
MOSTLY_LOST = 0.2


@dataclass(frozen=True)
class MotReport:
    motp: float
    mota: float
    r_m: float
    r_fp: float
    r_mme: float
    mostly_tracked: float
    partially_tracked: float
    mostly_lost: float
    misses: int
    false_positives: int
    mismatches: int
    matches: int
    gt_boxes: int
    n_objects: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(gt, hyp: Sequence[TrackOutput], iou_threshold: float = 0.5) -> MotReport:
    """Score tracker output against ground truth.

    Matching is geometric with distance ``1 - IoU``; class labels are ignored.
    Correspondences from earlier frames are kept while their IoU stays at or
    above the threshold, and a mismatch is counted whenever an object's
    hypothesis id differs from the one it was last matched to.
    """
    gt_frames = sorted(gt.frames, key=lambda f: f.frame_index)
    indices = [f.frame_index for f in gt_frames]
    if len(set(indices)) != len(indices):
        raise DataError("ground truth has duplicate frame indices")
    known = set(indices)
    hyp_by_frame: Dict[int, List[TrackOutput]] = defaultdict(list)
    for h in hyp:
        if h.frame_index not in known:
            raise DataError(f"hypothesis frame {h.frame_index} is not in the ground truth")
        hyp_by_frame[h.frame_index].append(h)

    misses = fps = mismatches = matches = total = 0
    dist_sum = 0.0
    last_match: Dict[int, int] = {}  # object id -> hypothesis id it was last matched to
    prev_pairs: Dict[int, int] = {}  # correspondences in the previous frame
    covered: Dict[int, int] = defaultdict(int)
    lifespan: Dict[int, int] = defaultdict(int)

    for frame in gt_frames:
        objs = list(frame.objects)
        hyps = sorted(hyp_by_frame.get(frame.frame_index, []), key=lambda h: h.track_id)
        hyp_ids = [h.track_id for h in hyps]
        if len(set(hyp_ids)) != len(hyp_ids):
            raise DataError(f"frame {frame.frame_index}: duplicate hypothesis ids")
        for o in objs:
            lifespan[o.object_id] += 1
        total += len(objs)
        ious = iou_matrix(boxes_to_array([o.box for o in objs]), boxes_to_array([h.box for h in hyps]))
        ok = ious >= iou_threshold

        pairs: Dict[int, int] = {}  # gt row -> hyp col
        hyp_col = {hid: j for j, hid in enumerate(hyp_ids)}
        for i, o in enumerate(objs):
            hid = prev_pairs.get(o.object_id)
            j = hyp_col.get(hid) if hid is not None else None
            if j is not None and ok[i, j]:
                pairs[i] = j
        used_cols = set(pairs.values())
        free_rows = [i for i in range(len(objs)) if i not in pairs]
        free_cols = [j for j in range(len(hyps)) if j not in used_cols]
        if free_rows and free_cols:
            sub = ious[np.ix_(free_rows, free_cols)]
            for a, b in hungarian(1.0 - sub, ~(sub >= iou_threshold)):
                pairs[free_rows[a]] = free_cols[b]

        cur_pairs = {}
        for i, j in pairs.items():
            oid, hid = objs[i].object_id, hyps[j].track_id
            if oid in last_match and last_match[oid] != hid:
                mismatches += 1
            last_match[oid] = hid
            cur_pairs[oid] = hid
            covered[oid] += 1
            dist_sum += 1.0 - ious[i, j]
        matches += len(pairs)
        misses += len(objs) - len(pairs)
        fps += len(hyps) - len(pairs)
        prev_pairs = cur_pairs

    n_obj = len(lifespan)
    mt = pt = ml = 0
    for oid, life in lifespan.items():
        frac = covered[oid] / life
        if frac >= MOSTLY_TRACKED:
            mt += 1
        elif frac < MOSTLY_LOST:
            ml += 1
        else:
            pt += 1
    denom = float(total) if total else 1.0
    r_m, r_fp, r_mme = misses / denom, fps / denom, mismatches / denom
    pct = (lambda c: 100.0 * c / n_obj) if n_obj else (lambda c: 0.0)
    return MotReport(
        motp=dist_sum / matches if matches else 0.0,
        mota=1.0 - (r_m + r_fp + r_mme),
        r_m=r_m,
        r_fp=r_fp,
        r_mme=r_mme,
        mostly_tracked=pct(mt),
        partially_tracked=pct(pt),
        mostly_lost=pct(ml),
        misses=misses,
        false_positives=fps,
        mismatches=mismatches,
        matches=matches,
        gt_boxes=total,
        n_objects=n_obj,
    )
