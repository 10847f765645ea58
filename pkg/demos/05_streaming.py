# frame-by-frame inference: push pressure frames one at a time and check
# the emitted activations against the offline batch path

import time

import numpy as np

import solemyo as sm

cfg = sm.ModelConfig(d_model=64, ffn_dim=128, n_layers=2, n_heads=4)
params = sm.init_params(cfg, seed=7)

bio = sm.sample_bio(np.random.default_rng(3))
spec = sm.default_motions(duration_s=8.0)[2]
rec = sm.gen_recording(bio, spec, sm.SensorLayout.default(), seed=11)
frames = rec["frames"]
print(f"recording: {spec.name}, {len(frames)} frames at 20 Hz")

# streaming: one frame in, at most one 8-vector out
state = sm.StreamState(params, bio)
t_out, preds, latencies = [], [], []
for frame in frames:
    t0 = time.perf_counter()
    out = state.push(frame)
    latencies.append(time.perf_counter() - t0)
    if out is None:
        continue   # warm-up, first window not complete yet
    t_out.append(frame.t_ms)
    preds.append(out)
preds = np.stack(preds)

w = cfg.window_len
print(f"warm-up: {w - 1} frames with no output, "
      f"first emission at t = {t_out[0]} ms (frame {w})")
print(f"emitted {len(preds)} estimates for {len(frames)} frames")

# batch path over the same data
kg = np.stack([f.as_vector() for f in frames])
t_ms = np.array([f.t_ms for f in frames], dtype=np.int64)
raw = sm.SyncedRecording(t_ms=t_ms, pressure=kg,
                         activation=rec["activation"].T * 1000.0,
                         user_id="demo", motion_label=spec.name,
                         bio=bio, normalized=False)
batch = sm.predict_recording(params, sm.normalize(raw))

# the stream must agree with the batch rows it covers (from frame w on)
diff = np.abs(preds - batch[w - 1:]).max()
print(f"max |stream - batch| = {diff:.3g}")
assert diff < 1e-9

lat = np.array(latencies[w - 1:]) * 1000.0
print(f"per-frame latency: median {np.median(lat):.2f} ms, "
      f"p95 {np.percentile(lat, 95):.2f} ms "
      f"(budget is 50 ms at 20 Hz)")
