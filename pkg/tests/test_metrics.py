import dataclasses
import random

import numpy as np
import pytest

from cuetrack.core import STABLE, BoundingBox, TrackOutput
from cuetrack.errors import DataError
from cuetrack.metrics import evaluate
from cuetrack.simulator import GroundTruth, GtFrame, GtObject

from conftest import random_scene, scripted_scene


def gt_as_hyp(gt):
    return [TrackOutput(f.frame_index, o.object_id, o.box, o.class_id, STABLE) for f in gt.frames for o in f.objects]


def test_perfect_tracking():
    gt, _ = scripted_scene()
    r = evaluate(gt, gt_as_hyp(gt))
    assert (r.mota, r.motp, r.mostly_tracked) == (1.0, 0.0, 100.0)


def test_scripted_scene_counts():
    gt, hyp = scripted_scene()
    r = evaluate(gt, hyp)
    assert (r.misses, r.false_positives, r.mismatches, r.gt_boxes) == (1, 0, 2, 10)
    assert r.mota == pytest.approx(0.7, abs=1e-12)
    assert r.mota == pytest.approx(1 - (r.r_m + r.r_fp + r.r_mme), abs=1e-15)


def test_mostly_tracked_boundary_inclusive():
    gt, hyp = scripted_scene()
    # object B is matched on 4 of its 5 frames
    assert evaluate(gt, hyp).mostly_tracked == 100.0
    # dropping one more of B's boxes leaves it partially tracked
    fewer = [h for h in hyp if not (h.frame_index == 4 and h.box.cx > 200)]
    r = evaluate(gt, fewer)
    assert (r.mostly_tracked, r.partially_tracked) == (50.0, 50.0)


def test_no_hypotheses():
    gt, _ = scripted_scene()
    r = evaluate(gt, [])
    assert (r.r_m, r.r_fp, r.r_mme, r.mota) == (1.0, 0.0, 0.0, 0.0)
    assert r.mostly_lost == 100.0


def test_duplicated_hypotheses_add_false_positives():
    gt, hyp = scripted_scene()
    dup = hyp + [dataclasses.replace(h, track_id=h.track_id + 100) for h in hyp]
    base = evaluate(gt, hyp)
    r = evaluate(gt, dup)
    assert r.false_positives == base.false_positives + len(hyp)
    assert r.matches == base.matches and r.misses == base.misses


def test_persistent_correspondence_beats_better_iou():
    box = BoundingBox(100.0, 100.0, 40.0, 40.0)
    gt = GroundTruth([GtFrame(k, k / 30, (GtObject(1, box, 0),)) for k in range(2)])
    hyp = [
        TrackOutput(0, 1, BoundingBox(104.0, 100.0, 40.0, 40.0), 0, STABLE),
        TrackOutput(1, 1, BoundingBox(104.0, 100.0, 40.0, 40.0), 0, STABLE),
        TrackOutput(1, 2, box, 0, STABLE),
    ]
    r = evaluate(gt, hyp)
    assert r.mismatches == 0 and r.false_positives == 1


def test_below_threshold_is_not_a_match():
    box = BoundingBox(100.0, 100.0, 40.0, 40.0)
    gt = GroundTruth([GtFrame(0, 0.0, (GtObject(1, box, 0),))])
    r = evaluate(gt, [TrackOutput(0, 1, BoundingBox(130.0, 100.0, 40.0, 40.0), 0, STABLE)])
    assert (r.misses, r.false_positives) == (1, 1)


@pytest.mark.parametrize("seed", range(100))
def test_id_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    gt, hyp = random_scene(rng)
    ids = sorted({h.track_id for h in hyp})
    perm = list(ids)
    random.Random(seed).shuffle(perm)
    rename = dict(zip(ids, perm))
    renamed = [dataclasses.replace(h, track_id=rename[h.track_id]) for h in hyp]
    assert evaluate(gt, renamed) == evaluate(gt, hyp)


@pytest.mark.parametrize("seed", range(10))
def test_storage_order_does_not_matter(seed):
    rng = np.random.default_rng(seed)
    gt, hyp = random_scene(rng)
    shuffled_gt = GroundTruth(list(reversed(gt.frames)))
    shuffled_hyp = list(hyp)
    random.Random(seed).shuffle(shuffled_hyp)
    a, b = evaluate(gt, hyp), evaluate(shuffled_gt, shuffled_hyp)
    assert a == b
    assert a.mostly_tracked + a.partially_tracked + a.mostly_lost == pytest.approx(100.0, abs=1e-9)


def test_inconsistent_frames_rejected():
    gt, hyp = scripted_scene()
    with pytest.raises(DataError):
        evaluate(gt, hyp + [TrackOutput(99, 1, BoundingBox(1, 1, 1, 1), 0, STABLE)])
    with pytest.raises(DataError):
        evaluate(gt, hyp + [dataclasses.replace(hyp[0])])
