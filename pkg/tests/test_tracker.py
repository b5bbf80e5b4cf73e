import numpy as np
import pytest

from cuetrack.core import STABLE, TENTATIVE, FrameDetections
from cuetrack.errors import ConfigurationError, SequencingError
from cuetrack.kalman.filter import MULTI_FRAME
from cuetrack.tracker import EMBEDDING_MEMORY, Tracker, TrackerConfig, run_sequence

from conftest import kf_gate, make_detection, static_stream


def by_frame(outputs):
    out = {}
    for o in outputs:
        out.setdefault(o.frame_index, []).append(o)
    return out


def test_stable_on_third_consecutive_observation(noise, gate):
    tracker = Tracker(TrackerConfig(noise, gate))
    frames = static_stream(5, lambda k: True)
    emitted = [tracker.step(f) for f in frames]
    assert emitted[0] == [] and emitted[1] == []
    assert [o.status for o in emitted[2]] == [STABLE]
    assert {o.track_id for out in emitted[2:] for o in out} == {1}


def test_miss_restarts_the_count(noise, gate):
    # seen on 0, 1, missed on 2, seen again from 3 on
    frames = static_stream(7, lambda k: k != 2)
    out = by_frame(run_sequence(frames, TrackerConfig(noise, gate)))
    assert 3 not in out and 4 not in out
    assert [o.track_id for o in out[5]] == [1]


def test_tentative_tracks_emitted_on_request(noise, gate):
    frames = static_stream(3, lambda k: True)
    out = by_frame(run_sequence(frames, TrackerConfig(noise, gate, emit_tentative=True)))
    assert [o.status for o in out[0]] == [TENTATIVE]
    assert [o.status for o in out[1]] == [TENTATIVE]
    assert [o.status for o in out[2]] == [STABLE]


def test_deleted_on_first_frame_past_half_second(noise, gate):
    # observed on frames 0..4 (last at 4/30 s), then nothing
    frames = static_stream(30, lambda k: k < 5)
    tracker = Tracker(TrackerConfig(noise, gate))
    alive = []
    for f in frames:
        tracker.step(f)
        alive.append([tr.id for tr in tracker.tracks])
    last = 4
    # 15 frames later exactly 0.5 s have passed: still kept
    assert alive[last + 15] == [1]
    assert alive[last + 16] == []


def test_deletion_with_irregular_timestamps(noise, gate):
    det = make_detection(100.0, 100.0)
    times = [0.0, 0.1, 0.2, 0.45, 0.7, 0.70001]
    present = [True, True, True, False, False, False]
    tracker = Tracker(TrackerConfig(noise, gate))
    counts = []
    for k, (t, p) in enumerate(zip(times, present)):
        tracker.step(FrameDetections(k, t, (det,) if p else ()))
        counts.append(len(tracker.tracks))
    # 0.7 - 0.2 = 0.5 keeps the track, 0.70001 deletes it
    assert counts[4] == 1
    assert counts[5] == 0


def test_coasting_output_toggle(noise, gate):
    frames = static_stream(6, lambda k: k < 4)
    with_coast = by_frame(run_sequence(frames, TrackerConfig(noise, gate)))
    without = by_frame(run_sequence(frames, TrackerConfig(noise, gate, emit_coasting=False)))
    assert 5 in with_coast and 5 not in without


def test_reappearance_after_deletion_gets_new_id(noise, gate):
    frames = static_stream(40, lambda k: k < 4 or k >= 30)
    out = run_sequence(frames, TrackerConfig(noise, gate))
    assert sorted({o.track_id for o in out}) == [1, 2]


def test_two_objects_keep_ids(noise, gate):
    frames = []
    for k in range(20):
        t = k / 30.0
        frames.append(FrameDetections(k, t, (
            make_detection(100.0 + 60 * t, 100.0),
            make_detection(400.0 - 60 * t, 300.0),
        )))
    out = by_frame(run_sequence(frames, TrackerConfig(noise, gate)))
    for k in range(2, 20):
        assert sorted(o.track_id for o in out[k]) == [1, 2]
    assert out[19][0].box.cx == pytest.approx(100 + 60 * 19 / 30, abs=1.0)


def test_class_label_follows_latest_observation(noise, gate):
    frames = [FrameDetections(k, k / 30, (make_detection(50.0, 50.0, class_id=0 if k < 4 else 2),))
              for k in range(6)]
    out = by_frame(run_sequence(frames, TrackerConfig(noise, gate)))
    assert out[3][0].class_id == 0
    assert out[5][0].class_id == 2


def test_embedding_memory_bounded(noise, gate):
    tracker = Tracker(TrackerConfig(noise, gate))
    for f in static_stream(25, lambda k: True):
        tracker.step(f)
    assert len(tracker.tracks[0].embedding_memory) == EMBEDDING_MEMORY


def test_multi_frame_track_starts_with_displacement_velocity(noise):
    gate = kf_gate(50.0)
    tracker = Tracker(TrackerConfig(noise, gate, mode=MULTI_FRAME))
    tracker.step(FrameDetections(0, 0.0, (make_detection(100.0, 100.0, displacement=(-2.0, 1.0)),)))
    np.testing.assert_allclose(tracker.tracks[0].state.mean[4:6], [60.0, -30.0])


def test_timestamps_must_increase(noise, gate):
    tracker = Tracker(TrackerConfig(noise, gate))
    tracker.step(FrameDetections(0, 1.0, ()))
    with pytest.raises(SequencingError):
        tracker.step(FrameDetections(1, 1.0, ()))


def test_config_validation(noise, gate):
    with pytest.raises(ConfigurationError):
        TrackerConfig(noise, gate, stable_hits=0)
