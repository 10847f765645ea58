"""Streaming inference and the command-line surface."""

import json
import os

import numpy as np
import pytest

import solemyo as sm
from solemyo.cli import main


def _kg_frames(rec):
    kg = (np.asarray(rec.pressure) + 1.0) / 2.0 * sm.PRESSURE_MAX_KG
    return [sm.PressureFrame(int(t), row[:18].copy(), row[18:].copy())
            for t, row in zip(rec.t_ms, kg)]


# ---------------------------------------------------------------------------
# Streaming
# ---------------------------------------------------------------------------

def test_stream_warms_up_then_emits(small_ds, tiny_trained):
    params, _ = tiny_trained
    rec = small_ds[0]
    state = sm.StreamState(params, rec.bio)
    frames = _kg_frames(rec)
    w = params.config.window_len
    for frame in frames[: w - 1]:
        assert state.push(frame) is None
    out = state.push(frames[w - 1])
    assert out is not None and out.shape == (8,)
    assert out.min() > 0.0 and out.max() < 1.0


def test_stream_push_validates_frames(tiny_trained):
    params, _ = tiny_trained
    state = sm.StreamState(params, sm.BioProfile(60.0, 170.0, 30, 42.0, 1))
    with pytest.raises(sm.ConfigError):
        state.push(np.zeros(35))
    with pytest.raises(sm.OutOfRangeError):
        state.push(np.full(36, -0.5))
    with pytest.raises(sm.OutOfRangeError):
        state.push(np.full(36, 20.5))
    bad = np.zeros(36)
    bad[7] = np.nan
    with pytest.raises(sm.OutOfRangeError):
        state.push(bad)


def test_stream_state_bio_handling(tiny_trained):
    params, _ = tiny_trained
    sm.StreamState(params, np.full(5, 0.5))
    with pytest.raises(sm.ConfigError):
        sm.StreamState(params, np.full(4, 0.5))


def test_streaming_matches_batch_prediction(small_ds, tiny_trained):
    params, _ = tiny_trained
    rec = small_ds[2]
    w = params.config.window_len
    t_out, preds = sm.stream_recording(params, _kg_frames(rec), rec.bio)
    batch = sm.predict_recording(params, rec)
    assert len(preds) == rec.n_frames - (w - 1)
    np.testing.assert_array_equal(t_out, rec.t_ms[w - 1:])
    np.testing.assert_allclose(preds, batch[w - 1:], atol=1e-9)


def test_stream_recording_short_input_is_empty(tiny_trained):
    params, _ = tiny_trained
    frames = [np.zeros(36)] * (params.config.window_len - 1)
    t_out, preds = sm.stream_recording(
        params, frames, sm.BioProfile(60.0, 170.0, 30, 42.0, 1))
    assert len(t_out) == 0 and preds.shape == (0, 8)


def test_streaming_infer_wrapper(tiny_trained):
    params, _ = tiny_trained
    bio = sm.BioProfile(60.0, 170.0, 30, 42.0, 1)
    s1, s2 = sm.StreamState(params, bio), sm.StreamState(params, bio)
    rng = np.random.default_rng(0)
    for _ in range(params.config.window_len + 3):
        frame = rng.uniform(0, 20, 36)
        a, b = sm.streaming_infer(s1, frame), s2.push(frame)
        assert (a is None and b is None) or np.array_equal(a, b)


# ---------------------------------------------------------------------------
# CLI end to end
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def cli_dir(tmp_path_factory):
    """A config, generated dataset, and trained checkpoint for CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {
        "data": {"stride_train": 4},
        "model": {"window_len": 8, "d_model": 8, "mask_hidden": 4,
                  "n_layers": 1, "n_heads": 2, "ffn_dim": 16,
                  "dropout": 0.0, "film_hidden": 8, "head_hidden": 8},
        "train": {"lr": 1e-3, "batch_size": 64, "l2_coeff": 0.0,
                  "epochs": 2, "seed": 0},
        "split": "louo:u01",
        "synth": {"n_users": 2, "duration_s": 4.0, "seed": 3},
    }
    cfg_path = str(root / "exp.json")
    with open(cfg_path, "w") as f:
        json.dump(cfg, f)
    ds = str(root / "ds")
    assert main(["gen", "--config", cfg_path, "--out", ds]) == 0
    ckpt = str(root / "model.ckpt")
    assert main(["train", "--config", cfg_path,
                 "--data", os.path.join(ds, "manifest.json"),
                 "--out", ckpt]) == 0
    return {"root": root, "cfg": cfg_path, "ds": ds, "ckpt": ckpt,
            "manifest": os.path.join(ds, "manifest.json")}


def test_cli_gen_writes_dataset(cli_dir):
    recs = sm.load_dataset(cli_dir["manifest"])
    assert len(recs) == 12
    assert {r.user_id for r in recs} == {"u00", "u01"}


def test_cli_train_outputs_checkpoint_and_trace(cli_dir):
    params, cfg = sm.load_checkpoint(cli_dir["ckpt"])
    assert cfg.window_len == 8
    trace = sm.load_trace_csv(cli_dir["ckpt"] + ".trace.csv")
    assert len(trace) == 2
    assert params.meta["experiment"]["split"] == "louo:u01"


def test_cli_eval_and_determinism(cli_dir, tmp_path):
    rep1, rep2 = str(tmp_path / "r1.json"), str(tmp_path / "r2.json")
    args = ["eval", "--ckpt", cli_dir["ckpt"], "--data", cli_dir["manifest"],
            "--split", "louo:u01"]
    assert main(args + ["--report", rep1]) == 0
    assert main(args + ["--report", rep2]) == 0
    # same inputs, same seeds: byte-identical reports
    assert open(rep1, "rb").read() == open(rep2, "rb").read()
    doc = json.load(open(rep1))
    assert 0.0 <= doc["rmse_mean"] <= 1.0
    assert doc["n_recordings"] == 6
    assert set(doc["rmse_per_muscle"]) == set(sm.MUSCLE_NAMES)


def test_cli_eval_oracle_token(cli_dir, tmp_path):
    rep = str(tmp_path / "oracle.json")
    assert main(["eval", "--ckpt", "oracle", "--data", cli_dir["manifest"],
                 "--split", "louo:u01", "--report", rep]) == 0
    doc = json.load(open(rep))
    assert doc["rmse_mean"] == 0.0
    assert doc["pearson_mean"] == pytest.approx(1.0, abs=1e-12)


def test_cli_eval_dump_and_plots(cli_dir, tmp_path):
    rep = str(tmp_path / "r.json")
    dump, plots = str(tmp_path / "dump"), str(tmp_path / "plots")
    assert main(["eval", "--ckpt", cli_dir["ckpt"], "--data", cli_dir["manifest"],
                 "--split", "lomo:squat", "--report", rep,
                 "--dump", dump, "--plots", plots]) == 0
    assert sorted(os.listdir(dump)) == ["u00_squat.csv", "u01_squat.csv"]
    assert "<svg" in open(os.path.join(plots, "u00_squat.svg")).read()


def test_cli_infer_and_imbalance(cli_dir, tmp_path):
    pred_csv = str(tmp_path / "pred.csv")
    assert main(["infer", "--ckpt", cli_dir["ckpt"],
                 "--pressure", os.path.join(cli_dir["ds"], "u01_sway.pressure.csv"),
                 "--bio", os.path.join(cli_dir["ds"], "u01.bio.json"),
                 "--out", pred_csv]) == 0
    with open(pred_csv) as f:
        assert f.readline().strip() == "t_ms," + ",".join(f"pred{i}" for i in range(8))
        n_rows = sum(1 for _ in f)
    assert n_rows == 80 - 7  # warm-up eats window_len - 1 frames

    rep = str(tmp_path / "imb.json")
    assert main(["imbalance", "--input", pred_csv, "--report", rep]) == 0
    doc = json.load(open(rep))
    assert 0.0 <= doc["imbalance_score"] <= 1.0
    assert set(doc["per_pair"]) == {"bicep", "back", "quad", "ham"}


def test_cli_imbalance_symmetric_prediction_scores_zero(tmp_path):
    t_ms = np.arange(30) * sm.FRAME_MS
    half = np.random.default_rng(1).uniform(0, 1, (30, 4))
    pred = np.repeat(half, 2, axis=1)  # left == right for every pair
    path = str(tmp_path / "sym.csv")
    sm.write_prediction_csv(path, t_ms, None, pred)
    rep = str(tmp_path / "rep.json")
    assert main(["imbalance", "--input", path, "--report", rep]) == 0
    assert json.load(open(rep))["imbalance_score"] == 0.0


def test_cli_exit_codes(cli_dir, tmp_path, monkeypatch):
    # 1: usage problems
    assert main(["no-such-command"]) == 1
    assert main(["train", "--config", cli_dir["cfg"]]) == 1
    # 2: broken inputs
    assert main(["eval", "--ckpt", str(tmp_path / "missing.ckpt"),
                 "--data", cli_dir["manifest"], "--split", "louo:u01",
                 "--report", str(tmp_path / "r.json")]) == 2
    bad_cfg = str(tmp_path / "bad.json")
    with open(bad_cfg, "w") as f:
        json.dump({"bogus_section": {}}, f)
    assert main(["gen", "--config", bad_cfg, "--out", str(tmp_path / "d")]) == 2
    # 3: numeric failures during training
    def boom(*a, **kw):
        raise sm.TrainingError("diverged", epoch=0)
    monkeypatch.setattr("solemyo.cli.fit", boom)
    assert main(["train", "--config", cli_dir["cfg"],
                 "--data", cli_dir["manifest"],
                 "--out", str(tmp_path / "c.ckpt")]) == 3


def test_cli_gen_seed_override(cli_dir, tmp_path):
    out = str(tmp_path / "ds2")
    assert main(["gen", "--config", cli_dir["cfg"], "--out", out,
                 "--seed", "4"]) == 0
    a = open(os.path.join(cli_dir["ds"], "u00_squat.pressure.csv")).read()
    b = open(os.path.join(out, "u00_squat.pressure.csv")).read()
    assert a != b


# ---------------------------------------------------------------------------
# Experiment config files
# ---------------------------------------------------------------------------

def test_experiment_config_roundtrip(tmp_path):
    cfg = sm.ExperimentConfig()
    cfg.split = "lomo:march"
    path = str(tmp_path / "exp.json")
    sm.save_experiment_config(path, cfg)
    again = sm.load_experiment_config(path)
    assert again.to_dict() == cfg.to_dict()


def test_experiment_config_rejects_unknown_keys(tmp_path):
    path = str(tmp_path / "exp.json")
    with open(path, "w") as f:
        json.dump({"data": {"stride_train": 2, "typo_key": 1}}, f)
    with pytest.raises(sm.ConfigError):
        sm.load_experiment_config(path)
    with open(path, "w") as f:
        f.write("{not json")
    with pytest.raises(sm.DataFormatError):
        sm.load_experiment_config(path)
