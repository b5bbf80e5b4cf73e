"""Command-line entry point: simulate, fit, track, evaluate, experiment."""
from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from . import io
from .assoc.features import parse_feature_set
from .config import RunConfig, load_config
from .errors import ConfigurationError, CuetrackError
from .metrics import evaluate
from .pipeline import STRESS_SCENARIO, ModelBundle, fit_models, run_experiment, summarize, track
from .simulator import generate

logger = logging.getLogger("cuetrack")

IO_EXIT_CODE = 9

TABLE_COLUMNS = (
    ("features", "{:<10}"),
    ("mota", "{:>8.4f}"),
    ("motp", "{:>8.4f}"),
    ("r_m", "{:>8.4f}"),
    ("r_fp", "{:>8.4f}"),
    ("r_mme", "{:>8.4f}"),
    ("mostly_tracked", "{:>6.1f}"),
    ("partially_tracked", "{:>6.1f}"),
    ("mostly_lost", "{:>6.1f}"),
)
TABLE_HEADER = ("features", "MOTA", "MOTP", "r_m", "r_fp", "r_mme", "MT%", "PT%", "ML%")


def _config(path: Optional[str], base=None) -> RunConfig:
    if path:
        return load_config(path, base)
    return RunConfig(scenario=base) if base is not None else RunConfig()


def _required(value, flag: str):
    if value is None:
        raise ConfigurationError(f"{flag} is required (on the command line or in the config)")
    return value


def format_table(summary: Sequence[dict]) -> str:
    head = [f"{TABLE_HEADER[0]:<10}"] + [
        f"{h:>8}" if i < 6 else f"{h:>6}" for i, h in enumerate(TABLE_HEADER) if i > 0]
    lines = [" ".join(head)]
    for row in summary:
        cells = [fmt.format(row[k]) for k, fmt in TABLE_COLUMNS]
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    cfg = _config(args.config).with_seed(args.seed)
    out_gt = _required(args.out_gt or cfg.out_gt, "--out-gt")
    out_det = _required(args.out_det or cfg.out_det, "--out-det")
    gt, frames = generate(cfg.scenario)
    io.write_ground_truth(out_gt, gt)
    io.write_detections(out_det, frames)
    n = sum(len(f.detections) for f in frames)
    print(f"frames = {len(frames)}\nobjects = {len(gt.object_ids())}\ndetections = {n}")
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args.config)
    features = parse_feature_set(args.features or cfg.features)
    gt = io.parse_ground_truth(args.gt)
    frames = io.parse_detections(args.det)
    fps = args.fps if args.fps else io.infer_fps(frames)
    seed = args.seed if args.seed is not None else cfg.scenario.seed
    bundle = fit_models(gt, frames, features, fps, seed=seed, reg_c=cfg.reg_c, epochs=cfg.epochs,
                        max_unobserved=cfg.max_unobserved)
    io.write_model(args.out_model, bundle.features, bundle.mode, bundle.noise, bundle.svm)
    print(f"features = {','.join(bundle.features)}\nmode = {bundle.mode.value}")
    return 0


def cmd_track(args) -> int:
    cfg = _config(args.config)
    features, mode, noise, svm = io.parse_model(args.model)
    if args.features is not None and parse_feature_set(args.features) != features:
        raise ConfigurationError(
            f"--features {args.features} does not match the model ({','.join(features)})")
    frames = io.parse_detections(args.det)
    fps = args.fps if args.fps else io.infer_fps(frames, default=1.0 / noise.dt_ref)
    bundle = ModelBundle(features, mode, noise, svm)
    out = track(frames, bundle, dt_ref=1.0 / fps, **cfg.tracker_overrides())
    io.write_tracks(args.out, out)
    print(f"boxes = {len(out)}\ntracks = {len({o.track_id for o in out})}")
    return 0


def cmd_evaluate(args) -> int:
    gt = io.parse_ground_truth(args.gt)
    hyp = io.parse_tracks(args.hyp)
    report = evaluate(gt, hyp, args.iou)
    if args.out:
        io.write_report(args.out, report)
    for k, v in report.as_dict().items():
        print(f"{k} = {v:.6g}" if isinstance(v, float) else f"{k} = {v}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args.config, base=STRESS_SCENARIO)
    seed = args.seed if args.seed is not None else cfg.scenario.seed
    n_seeds = args.n_seeds or cfg.n_seeds
    rows = run_experiment(cfg.scenario, range(seed, seed + n_seeds),
                          iou_threshold=cfg.iou_threshold,
                          train_seed_offset=cfg.train_seed_offset, share_noise=cfg.share_noise)
    table = format_table(summarize(rows))
    out = args.out or cfg.out
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table)
    sys.stdout.write(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cuetrack", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic scene")
    s.add_argument("--config", help="key = value file of scenario fields")
    s.add_argument("--out-gt", help="ground-truth JSONL (default from config)")
    s.add_argument("--out-det", help="detections JSONL (default from config)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate noise covariances and train the gate")
    f.add_argument("--gt", required=True, help="ground-truth JSONL")
    f.add_argument("--det", required=True, help="detections JSONL")
    f.add_argument("--features", help="comma list from C,KF,D,E (default C,KF,E)")
    f.add_argument("--out-model", required=True, help="model JSON to write")
    f.add_argument("--fps", type=float, help="frame rate; inferred from timestamps if absent")
    f.add_argument("--config", help="key = value file (reg_c, epochs, ...)")
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("track", help="run the tracker over a detection file")
    t.add_argument("--det", required=True, help="detections JSONL")
    t.add_argument("--model", required=True, help="model JSON written by fit")
    t.add_argument("--features", help="must match the model if given")
    t.add_argument("--fps", type=float, help="frame rate; inferred from timestamps if absent")
    t.add_argument("--out", required=True, help="track JSONL to write")
    t.add_argument("--config", help="key = value file of tracker fields")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("evaluate", help="CLEAR MOT scores of a track file")
    e.add_argument("--gt", required=True, help="ground-truth JSONL")
    e.add_argument("--hyp", required=True, help="track JSONL")
    e.add_argument("--iou", type=float, default=0.5, help="match threshold (default 0.5)")
    e.add_argument("--out", help="report JSON to write")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="compare the four feature sets on simulated scenes")
    x.add_argument("--config", help="key = value overrides of the stress scenario")
    x.add_argument("--n-seeds", type=int, help="number of seeds (default 20)")
    x.add_argument("--out", help="table text file to write")
    x.set_defaults(func=cmd_experiment)

    for sp in (s, f, t, e, x):
        sp.add_argument("--seed", type=int,
                        help="random seed (track and evaluate are deterministic and ignore it)")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CuetrackError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_EXIT_CODE


if __name__ == "__main__":
    sys.exit(main())
