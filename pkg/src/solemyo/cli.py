"""Command-line surface: gen, train, eval, infer, imbalance.

Exit codes: 0 success, 1 usage, 2 data/format/config problem, 3 numeric or
training failure. Every command is a pure function of its inputs and
seeds, so re-runs reproduce outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import load_experiment_config
from .data import (
    load_bio_json,
    load_dataset,
    load_pressure_csv,
    window,
)
from .errors import NumericError, SolemyoError
from .evaluate import (
    evaluate,
    imbalance_per_pair,
    imbalance_score,
    plot_recording_svg,
    predict_recording,
    write_prediction_csv,
)
from .model import load_checkpoint, save_checkpoint
from .stream import StreamState
from .synth import MotionSpec, gen_dataset
from .train import SplitSpec, fit, save_trace_csv, split


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="solemyo",
                description="Full-body muscle activation from insole pressure.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--config", required=True, help="experiment config JSON")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=int, default=None, help="override the synth seed")
    g.set_defaults(func=_cmd_gen)

    t = sub.add_parser("train", help="train a model on a dataset manifest")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True, help="dataset manifest JSON")
    t.add_argument("--out", required=True, help="output checkpoint path")
    t.add_argument("--trace", default=None, help="loss trace CSV (default: <out>.trace.csv)")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on held-out data")
    e.add_argument("--ckpt", required=True,
                   help="checkpoint file, or 'oracle' for a metric self check")
    e.add_argument("--data", required=True)
    e.add_argument("--split", required=True,
                   help="louo:<user> | lomo:<motion> | random:<fraction>")
    e.add_argument("--report", required=True, help="output report JSON")
    e.add_argument("--plots", default=None, help="directory for SVG trace plots")
    e.add_argument("--dump", default=None, help="directory for per-frame prediction CSVs")
    e.set_defaults(func=_cmd_eval)

    i = sub.add_parser("infer", help="streaming inference over a pressure CSV")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--pressure", required=True)
    i.add_argument("--bio", required=True)
    i.add_argument("--out", required=True, help="output prediction CSV")
    i.add_argument("--realtime", action="store_true",
                   help="replay at sensor speed (one frame per 50 ms)")
    i.set_defaults(func=_cmd_infer)

    b = sub.add_parser("imbalance", help="left/right asymmetry of a prediction CSV")
    b.add_argument("--input", required=True)
    b.add_argument("--report", required=True)
    b.set_defaults(func=_cmd_imbalance)
    return p


def _cmd_gen(args) -> int:
    cfg = load_experiment_config(args.config)
    synth = dict(cfg.synth)
    if args.seed is not None:
        synth["seed"] = args.seed
    if "motions" in synth:
        synth["motions"] = [MotionSpec.from_dict(d) for d in synth["motions"]]
    summary = gen_dataset(args.out, **synth)
    print(f"wrote {summary['n_recordings']} recordings "
          f"({summary['n_users']} users x {summary['motions']}) "
          f"to {summary['manifest']}")
    if summary["hull_violation_frames"]:
        print(f"warning: CoP left the footprint hull in "
              f"{summary['hull_violation_frames']} frames", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    cfg = load_experiment_config(args.config)
    recordings = load_dataset(args.data)
    if cfg.split:
        train_recs, _ = split(recordings, SplitSpec.parse(cfg.split, seed=cfg.train.seed))
    else:
        train_recs = recordings
    windows = [w for rec in train_recs
               for w in window(rec, cfg.model.window_len, cfg.data.stride_train)]
    params, trace = fit(windows, cfg.train, cfg.model, cfg.augment)
    meta = dict(params.meta)
    meta["experiment"] = cfg.to_dict()
    save_checkpoint(params, params.config, args.out, meta=meta)
    save_trace_csv(args.trace or args.out + ".trace.csv", trace)
    print(f"trained {cfg.train.epochs} epochs on {len(windows)} windows; "
          f"best val loss {meta['best_val_loss']:.6f} at epoch {meta['best_epoch']}; "
          f"checkpoint {args.out}")
    return 0


def _cmd_eval(args) -> int:
    # the literal token "oracle" scores ground truth against itself, a
    # quick self check of the whole metric pipeline (rmse 0, pearson 1)
    params = None if args.ckpt == "oracle" else load_checkpoint(args.ckpt)[0]
    recordings = load_dataset(args.data)
    _, test_recs = split(recordings, SplitSpec.parse(args.split))
    report = evaluate(params, test_recs)
    with open(args.report, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")

    if args.dump or args.plots:
        for d in (args.dump, args.plots):
            if d:
                os.makedirs(d, exist_ok=True)
        for rec in test_recs:
            pred = predict_recording(params, rec)
            stem = f"{rec.user_id}_{rec.motion_label}"
            if args.dump:
                write_prediction_csv(os.path.join(args.dump, stem + ".csv"),
                                     rec.t_ms, rec.activation, pred)
            if args.plots:
                plot_recording_svg(os.path.join(args.plots, stem + ".svg"),
                                   rec.t_ms, rec.activation, pred, title=stem)
    p_mean = report.pearson_mean
    print(f"rmse_mean {report.rmse_mean:.6f}  "
          f"pearson_mean {'n/a' if p_mean is None else f'{p_mean:.4f}'}  "
          f"({report.n_recordings} recordings, {report.n_frames} frames)")
    return 0


def _cmd_infer(args) -> int:
    params, _ = load_checkpoint(args.ckpt)
    frames = load_pressure_csv(args.pressure)
    bio = load_bio_json(args.bio)
    state = StreamState(params, bio)
    t_out, preds = [], []
    for frame in frames:
        out = state.push(frame)
        if args.realtime:
            time.sleep(0.05)
        if out is not None:
            t_out.append(frame.t_ms)
            preds.append(out)
    write_prediction_csv(args.out, np.asarray(t_out, dtype=np.int64), None,
                         np.stack(preds) if preds else np.empty((0, 8)))
    print(f"emitted {len(preds)} predictions "
          f"(warm-up {params.config.window_len - 1} frames) to {args.out}")
    return 0


def _read_prediction_csv(path):
    """Accepts the infer output or the eval dump; returns the pred columns."""
    from .errors import DataFormatError

    with open(path) as f:
        header = f.readline().strip()
        cols = header.split(",")
        if cols[0] != "t_ms" or not all(c.startswith(("pred", "gt")) for c in cols[1:]):
            raise DataFormatError(f"{path!r} is not a prediction CSV (header {header!r})")
        pred_idx = [i for i, c in enumerate(cols) if c.startswith("pred")]
        if len(pred_idx) != 8:
            raise DataFormatError(f"{path!r} has {len(pred_idx)} pred columns, expected 8")
        body = np.loadtxt(f, delimiter=",", ndmin=2)
    if body.size == 0:
        raise DataFormatError(f"{path!r} holds no prediction rows")
    return body[:, 0].astype(np.int64), body[:, pred_idx]


def _cmd_imbalance(args) -> int:
    t_ms, preds = _read_prediction_csv(args.input)
    per_pair = imbalance_per_pair(preds.T)
    score = imbalance_score(preds.T)
    doc = {
        "imbalance_score": score,
        "per_pair": {
            "bicep": per_pair[0], "back": per_pair[1],
            "quad": per_pair[2], "ham": per_pair[3],
        },
        "n_frames": int(len(t_ms)),
    }
    with open(args.report, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"imbalance_score {score:.6f} over {len(t_ms)} frames")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericError as exc:         # includes TrainingError
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (SolemyoError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
