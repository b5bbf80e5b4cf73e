import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuetrack import io
from cuetrack.cli import main
from cuetrack.config import RunConfig, parse_config_text
from cuetrack.core import EMBEDDING_DIM, BoundingBox, Detection, FrameDetections
from cuetrack.errors import ConfigurationError, ParseError, SchemaError
from cuetrack.metrics import evaluate
from cuetrack.pipeline import fit_models
from cuetrack.simulator import ScenarioConfig, generate

from conftest import scripted_scene

real9 = st.floats(-1e4, 1e4, allow_nan=False).map(io.q9)
pos9 = st.floats(0.5, 500, allow_nan=False).map(io.q9)
unit9 = st.floats(0, 1).map(io.q9)


@st.composite
def detection_frames(draw):
    n = draw(st.integers(0, 5))
    frames = []
    t = 0.0
    for k in range(n):
        t = io.q9(t + draw(st.floats(0.001, 1.0)))
        dets = []
        for _ in range(draw(st.integers(0, 3))):
            disp = draw(st.none() | st.tuples(real9, real9))
            dets.append(Detection(
                BoundingBox(draw(real9), draw(real9), draw(pos9), draw(pos9)),
                draw(unit9), draw(st.integers(0, 9)), draw(unit9),
                tuple(draw(st.lists(real9, min_size=EMBEDDING_DIM, max_size=EMBEDDING_DIM))), disp))
        frames.append(FrameDetections(k, t, tuple(dets)))
    return frames


def test_empty_detection_file(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text("")
    assert io.parse_detections(p) == []


def test_single_record(tmp_path):
    p = tmp_path / "d.jsonl"
    rec = {"frame": 0, "time": 0.0, "cx": 10, "cy": 10, "w": 4, "h": 4, "objectness": 0.5,
           "class_id": 1, "class_score": 0.25, "embedding": [0.125] * 32}
    p.write_text(json.dumps(rec) + "\n")
    [fr] = io.parse_detections(p)
    assert fr.frame_index == 0 and fr.timestamp == 0.0
    [d] = fr.detections
    assert d.box == BoundingBox(10.0, 10.0, 4.0, 4.0)
    assert (d.objectness, d.class_id, d.class_score) == (0.5, 1, 0.25)
    assert d.embedding == (0.125,) * 32 and d.displacement is None


@settings(max_examples=100, deadline=None)
@given(detection_frames())
def test_detection_round_trip(tmp_path_factory, frames):
    p = tmp_path_factory.mktemp("rt") / "d.jsonl"
    io.write_detections(p, frames)
    back = io.parse_detections(p)
    assert back == frames
    first = p.read_bytes()
    io.write_detections(p, back)
    assert p.read_bytes() == first


def test_q9_values_survive_text(tmp_path):
    rng = np.random.default_rng(0)
    for x in rng.normal(0, 1e3, 1000):
        v = io.q9(x)
        assert float(repr(v)) == v and io.q9(v) == v


def test_parse_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "d.jsonl"
    good = {"frame": 0, "time": 0.0, "cx": 10, "cy": 10, "w": 4, "h": 4, "objectness": 0.5,
            "class_id": 1, "class_score": 0.25, "embedding": [0.0] * 32}
    p.write_text(json.dumps(good) + "\n{not json\n")
    with pytest.raises(ParseError, match="line 2"):
        io.parse_detections(p)
    p.write_text(json.dumps(dict(good, embedding=[0.0] * 31)) + "\n")
    with pytest.raises(SchemaError, match="line 1"):
        io.parse_detections(p)
    p.write_text(json.dumps(dict(good, class_id="a")) + "\n")
    with pytest.raises(ParseError):
        io.parse_detections(p)
    p.write_text(json.dumps(dict(good, w=-1)) + "\n")
    with pytest.raises(SchemaError):
        io.parse_detections(p)
    later = dict(good, frame=1, time=0.1)
    p.write_text(json.dumps(later) + "\n" + json.dumps(good) + "\n")
    with pytest.raises(ParseError, match="line 2"):
        io.parse_detections(p)


def test_empty_frames_preserved(tmp_path):
    frames = [FrameDetections(0, 0.0, ()), FrameDetections(1, 0.04, ())]
    p = tmp_path / "d.jsonl"
    io.write_detections(p, frames)
    assert io.parse_detections(p) == frames


def test_ground_truth_tracks_report_round_trip(tmp_path):
    gt, hyp = scripted_scene()
    io.write_ground_truth(tmp_path / "gt.jsonl", gt)
    back = io.parse_ground_truth(tmp_path / "gt.jsonl")
    assert back.frames == [type(f)(f.frame_index, io.q9(f.timestamp), f.objects) for f in gt.frames]
    io.write_tracks(tmp_path / "t.jsonl", hyp)
    assert io.parse_tracks(tmp_path / "t.jsonl") == hyp
    report = evaluate(gt, hyp)
    io.write_report(tmp_path / "r.json", report)
    again = io.parse_report(tmp_path / "r.json")
    assert again.mismatches == report.mismatches and again.mota == pytest.approx(report.mota, rel=1e-8)


def test_model_round_trip_is_exact(tmp_path):
    cfg = ScenarioConfig(n_frames=40, n_objects=3, seed=2)
    gt, frames = generate(cfg)
    b = fit_models(gt, frames, "C,KF,E", cfg.fps)
    io.write_model(tmp_path / "m.json", b.features, b.mode, b.noise, b.svm)
    features, mode, noise, svm = io.parse_model(tmp_path / "m.json")
    assert features == b.features and mode is b.mode
    np.testing.assert_array_equal(noise.process_q, b.noise.process_q)
    np.testing.assert_array_equal(svm.weights, b.svm.weights)
    assert svm.bias == b.svm.bias


def test_infer_fps():
    frames = [FrameDetections(k, io.q9(k / 30), ()) for k in range(10)]
    assert io.infer_fps(frames) == 30.0
    with pytest.raises(ParseError):
        io.infer_fps(frames[:1])


def test_config_parsing():
    cfg = parse_config_text("""
        # scenario
        n_objects = 7
        image_size = 640, 480
        layout = crossing
        lifespan_range = 10, 20
        features = C, KF, D
        emit_coasting = false
        n_seeds = 3
    """)
    assert cfg.scenario.n_objects == 7 and cfg.scenario.image_size == (640, 480)
    assert cfg.scenario.lifespan_range == (10, 20) and cfg.scenario.layout == "crossing"
    assert cfg.features == ("D", "KF", "C") and cfg.emit_coasting is False and cfg.n_seeds == 3
    assert parse_config_text("").scenario == ScenarioConfig()
    base = ScenarioConfig(n_objects=9)
    assert parse_config_text("seed = 4", base).scenario == base.with_updates(seed=4)


@pytest.mark.parametrize("text", ["bogus = 1", "n_objects = many", "n_objects", "features = C",
                                  "seed = 1\nseed = 2", "emit_tentative = maybe", "image_size = 1, 2, 3"])
def test_config_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_run_config_defaults():
    assert RunConfig().features == ("E", "KF", "C")


@pytest.fixture
def scene_files(tmp_path):
    cfg = tmp_path / "scene.cfg"
    cfg.write_text("n_frames = 45\nn_objects = 3\n")
    rc = main(["simulate", "--config", str(cfg), "--out-gt", str(tmp_path / "gt.jsonl"),
               "--out-det", str(tmp_path / "det.jsonl"), "--seed", "5"])
    assert rc == 0
    return tmp_path


def run_pipeline(d, tag):
    assert main(["fit", "--gt", str(d / "gt.jsonl"), "--det", str(d / "det.jsonl"), "--features", "C,KF,E",
                 "--out-model", str(d / f"m{tag}.json"), "--seed", "1"]) == 0
    assert main(["track", "--det", str(d / "det.jsonl"), "--model", str(d / f"m{tag}.json"),
                 "--features", "C,KF,E", "--fps", "30", "--out", str(d / f"t{tag}.jsonl"), "--seed", "1"]) == 0
    assert main(["evaluate", "--gt", str(d / "gt.jsonl"), "--hyp", str(d / f"t{tag}.jsonl"), "--iou", "0.5",
                 "--out", str(d / f"r{tag}.json"), "--seed", "1"]) == 0


def test_cli_pipeline_deterministic(scene_files, capsys):
    d = scene_files
    run_pipeline(d, "a")
    run_pipeline(d, "b")
    for stem in ("m", "t", "r"):
        ext = ".jsonl" if stem == "t" else ".json"
        assert (d / f"{stem}a{ext}").read_bytes() == (d / f"{stem}b{ext}").read_bytes()
    report = io.parse_report(d / "ra.json")
    assert report.mota > 0.8
    assert "mota = " in capsys.readouterr().out


def test_cli_error_exit_codes(scene_files, tmp_path, capsys):
    d = scene_files
    assert main(["evaluate", "--gt", str(d / "missing.jsonl"), "--hyp", str(d / "det.jsonl")]) == 9
    bad = tmp_path / "bad.jsonl"
    bad.write_text("garbage\n")
    assert main(["evaluate", "--gt", str(bad), "--hyp", str(bad)]) == ParseError.exit_code
    assert main(["fit", "--gt", str(d / "gt.jsonl"), "--det", str(d / "det.jsonl"), "--features", "C",
                 "--out-model", str(tmp_path / "m.json")]) == ConfigurationError.exit_code
    assert "error:" in capsys.readouterr().err


def test_cli_track_rejects_mismatched_features(scene_files):
    d = scene_files
    run_pipeline(d, "a")
    rc = main(["track", "--det", str(d / "det.jsonl"), "--model", str(d / "ma.json"), "--features", "C,KF",
               "--out", str(d / "x.jsonl")])
    assert rc == ConfigurationError.exit_code


def test_cli_experiment_small(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("n_frames = 30\nn_objects = 3\nn_seeds = 1\nfp_rate = 0.2\n")
    assert main(["experiment", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "a.txt")]) == 0
    assert main(["experiment", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "b.txt")]) == 0
    a = (tmp_path / "a.txt").read_text()
    assert a == (tmp_path / "b.txt").read_text()
    lines = a.splitlines()
    assert lines[0].split()[:2] == ["features", "MOTA"]
    assert [ln.split()[0] for ln in lines[1:]] == ["KF,C", "D,KF,C", "E,KF,C", "E,D,KF,C"]
