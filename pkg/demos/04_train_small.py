# train a small model on a synthetic multi-user set and evaluate on a
# held-out user; a scaled-down version of the leave-one-user-out protocol

import os
import tempfile
import time

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import solemyo as sm

os.makedirs("demos/out", exist_ok=True)

# cross-user transfer needs user diversity: with only a couple of training
# users the model memorizes their gait styles instead of the shared mapping
out = tempfile.mkdtemp(prefix="solemyo_demo_")
sm.gen_dataset(out, n_users=6, seed=21, duration_s=45.0, random_asymmetry=0.5)
recs = sm.load_dataset(os.path.join(out, "manifest.json"))

train_recs, test_recs = sm.split(recs, sm.SplitSpec.parse("louo:u00"))
wins = [w for r in train_recs for w in sm.window(r, 20, 10)]
print(f"train {len(train_recs)} recordings -> {len(wins)} windows; "
      f"test user u00 ({len(test_recs)} recordings)")

mcfg = sm.ModelConfig(d_model=128, ffn_dim=256, n_layers=2, n_heads=4, dropout=0.1)
tcfg = sm.TrainConfig(lr=3e-4, batch_size=128, l2_coeff=0.0, epochs=16, seed=0)
print(f"model: {sm.param_count(mcfg):,} parameters, "
      f"{sm.flops_per_window(mcfg)/1e6:.0f}M flops per window")

t0 = time.time()
params, trace = sm.fit(wins, tcfg, mcfg, augment_cfg=sm.AugmentConfig(copies=1))
print(f"trained {tcfg.epochs} epochs in {time.time()-t0:.0f} s; "
      f"best val {params.meta['best_val_loss']:.5f} "
      f"at epoch {params.meta['best_epoch']}")

report = sm.evaluate(params, test_recs)
_, baseline = sm.mean_predictor_rmse(train_recs, test_recs)
print(f"\nheld-out rmse {report.rmse_mean:.4f} "
      f"vs mean-predictor baseline {baseline:.4f} "
      f"({report.rmse_mean/baseline:.2f}x)")
print(f"pearson {report.pearson_mean:.3f}")
for motion, row in report.per_motion.items():
    print(f"  {motion:10s} rmse {row['rmse_mean']:.4f}")

ckpt = os.path.join("demos", "out", "small.ckpt")
sm.save_checkpoint(params, params.config, ckpt)
print(f"\ncheckpoint saved to {ckpt}")

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
axes[0].plot([r["train_loss"] for r in trace], label="train")
axes[0].plot([r["val_loss"] for r in trace], label="val")
axes[0].set_xlabel("epoch")
axes[0].set_ylabel("loss")
axes[0].legend()
rec = test_recs[0]
pred = sm.predict_recording(params, rec)
sec = rec.t_ms / 1000.0
axes[1].plot(sec[:200], rec.activation[:200, 4], label="measured l_quad")
axes[1].plot(sec[:200], pred[:200, 4], label="estimated")
axes[1].set_xlabel("time (s)")
axes[1].legend()
fig.tight_layout()
fig.savefig("demos/out/04_training.svg")
print("wrote demos/out/04_training.svg")
