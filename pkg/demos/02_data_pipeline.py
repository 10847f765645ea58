# from raw files to training windows: generate a small dataset, load it
# back, and walk one recording through synchronize -> normalize -> window

import os
import tempfile

import numpy as np

import solemyo as sm

out = tempfile.mkdtemp(prefix="solemyo_demo_")
info = sm.gen_dataset(out, n_users=3, seed=7, duration_s=12.0)
print(f"dataset: {info['n_recordings']} recordings, motions {info['motions']}")
print(f"hull violations: {info['hull_violation_frames']} frames")

# every recording is two CSVs (20 Hz pressure, 500 Hz sEMG) and a bio JSON;
# load_dataset resamples the sEMG onto the pressure clock and normalizes
recs = sm.load_dataset(os.path.join(out, "manifest.json"))
rec = recs[0]
print(f"\n{rec.user_id}/{rec.motion_label}: {rec.n_frames} frames, "
      f"normalized={rec.normalized}")
print(f"pressure range [{rec.pressure.min():.3f}, {rec.pressure.max():.3f}] "
      f"(normalized from [0, {sm.PRESSURE_MAX_KG}] kg)")
print(f"activation range [{rec.activation.min():.3f}, {rec.activation.max():.3f}]")

# the same steps by hand, starting from the files
frames = sm.load_pressure_csv(os.path.join(out, f"{rec.user_id}_{rec.motion_label}.pressure.csv"))
emg_t, emg_uv = sm.load_emg_csv(os.path.join(out, f"{rec.user_id}_{rec.motion_label}.emg.csv"))
bio = sm.load_bio_json(os.path.join(out, f"{rec.user_id}.bio.json"))
raw = sm.synchronize(frames, (emg_t, emg_uv), bio=bio,
                     user_id=rec.user_id, motion_label=rec.motion_label)
norm = sm.normalize(raw)
print(f"\nmanual pipeline reproduces the loader: "
      f"{np.array_equal(norm.pressure, rec.pressure)}")

# denormalize is the exact inverse
back = sm.denormalize(norm)
print(f"denormalize restores kg exactly: "
      f"{np.allclose(back.pressure, raw.pressure, atol=1e-12)}")

# windowing: 1 s windows (20 frames), stride 10 for training
wins = sm.window(rec, 20, 10)
print(f"\nwindows at stride 10: {len(wins)} "
      f"(expected {(rec.n_frames - 20) // 10 + 1})")
print(f"window x {wins[0].x.shape} {wins[0].x.dtype}, "
      f"y {wins[0].y.shape}, bio {wins[0].bio_norm.shape}")

# the five bio attributes are min-max scaled over the cohort bounds
print(f"bio {bio.to_dict()}")
print(f"bio normalized {np.round(sm.normalize_bio(bio), 3)}")
