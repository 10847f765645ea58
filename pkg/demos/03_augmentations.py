# the two training-time pressure augmentations, seen up close:
# magnitude scaling of individual channels and per-channel temporal shifts

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import solemyo as sm

# one window with a clear structure: a moving front channel, a quiet heel
kg = np.zeros((36, 20))
kg[0] = 2.0 + 2.0 * np.sin(np.linspace(0, 2 * np.pi, 20))  # active, swing 4 kg
kg[1] = 1.0                                                 # quiet, flat
x = 2.0 * (kg / sm.PRESSURE_MAX_KG) - 1.0

cfg = sm.AugmentConfig()   # p_high 0.8, p_low 0.2, shift 0.5, copies 2
print(f"config: select active channels with p={cfg.p_high}, "
      f"quiet with p={cfg.p_low}, shift with p={cfg.shift_prob}, "
      f"alpha in [{cfg.alpha_min}, {cfg.alpha_max}]")

# scaling multiplies kg values, so zeros stay zero and the sensor ceiling
# still holds; shifting slides channels in time with edge replication
win = sm.TrainingWindow(x=x, y=np.zeros((8, 20)), user_id="u",
                        motion_label="m", bio_norm=np.full(5, 0.5))
rng = np.random.default_rng(4)
scaled = sm.scale_augment(x, cfg, rng)
shifted = sm.shift_augment(x, cfg, rng)
both = sm.augment_window(win, cfg, rng).x

kg_of = lambda v: (v + 1.0) * 10.0
print(f"\nchannel 0 peak: {kg_of(x[0]).max():.2f} kg -> "
      f"{kg_of(scaled[0]).max():.2f} kg after scaling")
print(f"zeros preserved: {np.all(kg_of(scaled[2:]) == 0.0)}")

# empirical selection frequencies over many draws
trials = 5000
hits = np.zeros(2)
rng = np.random.default_rng(5)
probe = sm.AugmentConfig(shift_prob=0.0)
for _ in range(trials):
    out = sm.scale_augment(x, probe, rng)
    hits[0] += np.any(out[0] != x[0])
    hits[1] += np.any(out[1] != x[1])
print(f"\nselection rate over {trials} draws: active {hits[0]/trials:.3f} "
      f"(target {cfg.p_high}), quiet {hits[1]/trials:.3f} (target {cfg.p_low})")

# dataset expansion: originals plus two augmented copies of each window
expanded = sm.augment_dataset([win] * 100, cfg, seed=0)
print(f"augment_dataset: 100 windows -> {len(expanded)} (copies=2)")

fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
for ax, (label, v) in zip(axes, [("original", x), ("scaled", scaled),
                                 ("scaled + shifted", both)]):
    ax.plot(kg_of(v[0]), label="channel 0 (active)")
    ax.plot(kg_of(v[1]), label="channel 1 (quiet)")
    ax.set_ylabel("kg")
    ax.set_title(label, fontsize=9)
axes[0].legend(fontsize=8)
axes[-1].set_xlabel("frame")
fig.tight_layout()
fig.savefig("demos/out/03_augment.svg")
print("wrote demos/out/03_augment.svg")
