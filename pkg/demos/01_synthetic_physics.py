# the physical chain behind the synthetic data:
# muscle activation -> center of mass -> center of pressure -> insole loads

import os

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

import solemyo as sm
from solemyo.synth import GRAVITY, PRESSURE_FS

os.makedirs("demos/out", exist_ok=True)

bio = sm.BioProfile(weight_kg=68.0, height_cm=176.0, age_years=29,
                    shoe_size_eu=43.0, gender_code=0)
body = sm.BodyModel.from_bio(bio)
layout = sm.SensorLayout.default()

print(f"body: {body.total_mass:.0f} kg, pendulum length {body.com_height:.3f} m")

# a squat-like program: strong quads and back, quiet arms
spec = sm.default_motions(duration_s=10.0)[0]
a = sm.gen_activation(spec, rng=np.random.default_rng(0))
com, acc = sm.com_from_activation(a, body)
cop = sm.cop_from_com(com, acc, body)
frames = sm.pressure_from_cop(cop, body, layout, rng=np.random.default_rng(1))
kg = np.stack([f.as_vector() for f in frames])

print(f"activation {a.shape}, CoM {com.shape}, CoP {cop.shape}, pressure {kg.shape}")
print(f"CoP stays inside the footprint hull: {sm.cop_in_hull(cop, layout).all()}")

# sanity check 1: with the body frozen the CoP is exactly under the CoM
com0, acc0 = sm.com_from_activation(np.full((8, 30), 0.5), body)
assert np.array_equal(sm.cop_from_com(com0, acc0, body), com0[:, :2])
print("static limit: CoP == CoM projection, exact")

# sanity check 2: total mass cancels out of the CoP equation
heavy = sm.BodyModel.from_bio(sm.BioProfile(136.0, 176.0, 29, 43.0, 0))
com2, acc2 = sm.com_from_activation(a, heavy)
assert np.array_equal(sm.cop_from_com(com2, acc2, heavy), cop)
print("mass cancellation: doubling the weight leaves the CoP unchanged")

# sanity check 3: a sinusoidal CoM obeys the pendulum closed form
# cop_x(t) = mean + A * (1 + h w^2 / g) * sin(w t)
freq = 1.0
probe = sm.MotionSpec(name="probe", amp=np.eye(8)[4] * 0.6,
                      freq=np.full(8, freq), phase=np.zeros(8),
                      duration_s=6.0, noise_sigma=0.0)
ap = sm.gen_activation(probe)
comp, accp = sm.com_from_activation(ap, body)
copp = sm.cop_from_com(comp, accp, body)
w_x = body.masses[4] * body.gains[4] / body.total_mass * body.directions[4, 0]
omega = 2 * np.pi * freq
t = np.arange(ap.shape[1]) / PRESSURE_FS
gain = 1.0 + body.com_height * omega**2 / GRAVITY
closed = 0.3 * w_x + 0.3 * w_x * gain * np.sin(omega * t)
err = np.max(np.abs(copp[1:-1, 0] - closed[1:-1])) / (abs(0.3 * w_x) * gain)
print(f"pendulum closed form: max deviation {err:.2%} of the amplitude")

# sanity check 4: before noise the 36 channels carry exactly the body mass
clean = np.stack([f.as_vector() for f in
                  sm.pressure_from_cop(cop, body, layout, rng=None)])
print(f"load conservation: max |sum - M| = "
      f"{np.max(np.abs(clean.sum(axis=1) - body.total_mass)):.2e} kg")

# picture: activation, CoP path, and one foot's mean load map
fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for m in range(8):
    axes[0].plot(t[:120], a[m, :120], lw=1, label=sm.MUSCLE_NAMES[m])
axes[0].set_title("activation (first 6 s)")
axes[0].set_xlabel("time (s)")
axes[0].legend(fontsize=6)
axes[1].plot(cop[:, 1], cop[:, 0], lw=0.7)
axes[1].set_title("CoP path (y vs x)")
axes[1].set_xlabel("lateral (m)")
axes[1].set_ylabel("forward (m)")
left = kg[:, :18].mean(axis=0).reshape(6, 3)
im = axes[2].imshow(left, cmap="viridis")
axes[2].set_title("left insole mean load (kg)")
fig.colorbar(im, ax=axes[2], shrink=0.8)
fig.tight_layout()
fig.savefig("demos/out/01_physics.svg")
print("wrote demos/out/01_physics.svg")
