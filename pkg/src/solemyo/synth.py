"""Synthetic-data generator with a physical forward chain.

Activation moves body segments, segments move the center of mass, the
center of mass and its acceleration place the center of pressure (inverted
pendulum, quasi-static vertical load), and the center of pressure spreads
the body weight over the 36 insole sensors. Every step is simple enough to
verify in closed form, which is what makes the generated datasets usable
as ground truth for training and evaluation.

Axes: x points forward, y to the wearer's right, z up. Units are meters,
kilograms, seconds.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data import (
    BIO_BOUNDS,
    FRAME_MS,
    MUSCLE_NAMES,
    BioProfile,
    PressureFrame,
    write_bio_json,
    write_emg_csv,
    write_manifest,
    write_pressure_csv,
)
from .errors import ConfigError, DataFormatError

GRAVITY = 9.81
PRESSURE_FS = 1000.0 / FRAME_MS   # 20 Hz
EMG_FS = 500.0

# Segment mass fractions per channel (MUSCLE_NAMES order); they sum to 1.
_MASS_FRACTIONS = np.array([0.05, 0.05, 0.275, 0.275, 0.10, 0.10, 0.075, 0.075])

# Rest positions chosen with zero horizontal mean: the resting body stands
# centered over the feet.
_REST_POS = np.array([
    [0.0, -0.20, 1.35], [0.0, 0.20, 1.35],   # biceps
    [0.0, -0.10, 1.10], [0.0, 0.10, 1.10],   # back
    [0.0, -0.12, 0.55], [0.0, 0.12, 0.55],   # quads
    [0.0, -0.12, 0.45], [0.0, 0.12, 0.45],   # hamstrings
])

# Unit displacement directions, mirrored in y for left/right.
_DIRECTIONS = np.array([
    [0.60, -0.35, 0.70], [0.60, 0.35, 0.70],
    [0.80, -0.25, -0.57], [0.80, 0.25, -0.57],
    [0.55, -0.35, -0.78], [0.55, 0.35, -0.78],
    [-0.70, -0.30, -0.45], [-0.70, 0.30, -0.45],
])
_DIRECTIONS = _DIRECTIONS / np.linalg.norm(_DIRECTIONS, axis=1, keepdims=True)

# Meters of segment travel at full activation.
_GAINS = np.array([0.10, 0.10, 0.10, 0.10, 0.08, 0.08, 0.09, 0.09])


@dataclass
class BodyModel:
    """Point-mass body: 8 effectors whose positions respond to activation."""

    total_mass: float                 # kg
    com_height: float                 # m, pendulum length in the CoP equation
    masses: np.ndarray                # (8,) kg, sums to total_mass
    rest_pos: np.ndarray              # (8, 3) m
    gains: np.ndarray                 # (8,) m per unit activation
    directions: np.ndarray            # (8, 3) unit vectors
    gravity: float = GRAVITY

    def validate(self):
        if self.com_height <= 0:
            raise ConfigError(f"com_height must be > 0, got {self.com_height}")
        if np.any(self.gains < 0):
            raise ConfigError("displacement gains must be >= 0")
        if abs(self.masses.sum() - self.total_mass) > 1e-9 * max(self.total_mass, 1.0):
            raise ConfigError("segment masses do not sum to the total mass")

    @classmethod
    def from_bio(cls, bio: BioProfile, gain_scale=None) -> "BodyModel":
        """Anthropometric body: masses from weight, pendulum from height."""
        gains = _GAINS if gain_scale is None else _GAINS * np.asarray(gain_scale)
        return cls(
            total_mass=float(bio.weight_kg),
            com_height=0.55 * bio.height_cm / 100.0,
            masses=_MASS_FRACTIONS * bio.weight_kg,
            rest_pos=_REST_POS.copy(),
            gains=np.asarray(gains, dtype=float),
            directions=_DIRECTIONS.copy(),
        )


@dataclass
class SensorLayout:
    """Planar sensor coordinates per foot plus the load-sharing kernel width."""

    coords: np.ndarray          # (18, 2) foot-local (x, y) in meters
    foot_separation: float = 0.20
    sigma: float = 0.05

    def validate(self):
        if self.sigma <= 0:
            raise ConfigError(f"kernel sigma must be > 0, got {self.sigma}")
        if self.coords.shape != (18, 2):
            raise ConfigError(f"layout needs (18, 2) coords, got {self.coords.shape}")
        span = np.ptp(self.coords, axis=0)
        if span[0] > 0.30 + 1e-9 or span[1] > 0.11 + 1e-9:
            raise ConfigError(f"sensor span {span} exceeds the 0.30 x 0.11 m footprint")

    @classmethod
    def default(cls) -> "SensorLayout":
        """3 columns x 6 rows per foot, row-major from the toes back."""
        xs = np.linspace(0.125, -0.125, 6)
        ys = np.array([-0.04, 0.0, 0.04])
        coords = np.array([[xs[i // 3], ys[i % 3]] for i in range(18)])
        return cls(coords=coords)

    def foot_centers(self):
        half = self.foot_separation / 2.0
        return np.array([0.0, -half]), np.array([0.0, half])   # left, right

    def to_json(self, path):
        doc = {
            "coords": self.coords.tolist(),
            "foot_separation": self.foot_separation,
            "sigma": self.sigma,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "SensorLayout":
        with open(path) as f:
            doc = json.load(f)
        try:
            layout = cls(
                coords=np.asarray(doc["coords"], dtype=float),
                foot_separation=float(doc["foot_separation"]),
                sigma=float(doc["sigma"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"bad layout file {path!r}: {exc}") from exc
        layout.validate()
        return layout


@dataclass
class MotionSpec:
    """Sinusoidal per-muscle activation program for one recording."""

    name: str
    amp: np.ndarray                   # (8,) peak activation in [0, 1]
    freq: np.ndarray                  # (8,) Hz
    phase: np.ndarray                 # (8,) rad
    duration_s: float = 60.0
    noise_sigma: float = 0.02         # activation-level noise
    asymmetry: float = 1.0            # multiplies right-side channels last

    def __post_init__(self):
        self.amp = np.broadcast_to(np.asarray(self.amp, dtype=float), (8,)).copy()
        self.freq = np.broadcast_to(np.asarray(self.freq, dtype=float), (8,)).copy()
        self.phase = np.broadcast_to(np.asarray(self.phase, dtype=float), (8,)).copy()

    def validate(self):
        if self.duration_s < 1.0:
            raise ConfigError(f"duration must be >= 1 s, got {self.duration_s}")
        if self.amp.min() < 0 or self.amp.max() > 1:
            raise ConfigError("amplitudes must lie in [0, 1]")
        if self.freq.max() > 5.0:
            raise ConfigError("frequencies above 5 Hz alias at the 20 Hz frame rate")
        if self.asymmetry < 0:
            raise ConfigError(f"asymmetry factor must be >= 0, got {self.asymmetry}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "amp": self.amp.tolist(),
            "freq": self.freq.tolist(),
            "phase": self.phase.tolist(),
            "duration_s": self.duration_s,
            "noise_sigma": self.noise_sigma,
            "asymmetry": self.asymmetry,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotionSpec":
        spec = cls(
            name=str(d["name"]),
            amp=np.asarray(d["amp"], dtype=float),
            freq=np.asarray(d["freq"], dtype=float),
            phase=np.asarray(d.get("phase", 0.0), dtype=float),
            duration_s=float(d.get("duration_s", 60.0)),
            noise_sigma=float(d.get("noise_sigma", 0.02)),
            asymmetry=float(d.get("asymmetry", 1.0)),
        )
        spec.validate()
        return spec


def _group_motion(name, bicep, back, quad, ham, freq, duration_s=60.0,
                  antiphase=False, noise_sigma=0.02):
    amp = np.repeat([bicep, back, quad, ham], 2)
    phase = np.tile([0.0, np.pi], 4) if antiphase else np.zeros(8)
    return MotionSpec(name=name, amp=amp, freq=np.full(8, freq), phase=phase,
                      duration_s=duration_s, noise_sigma=noise_sigma)


def default_motions(duration_s: float = 60.0) -> list[MotionSpec]:
    """Six desk-scale motion programs covering the muscle groups.

    Tempos are spread apart (0.3 to 0.9 Hz) so a one-second observation
    window can tell the programs apart, and the mixed program drives each
    muscle group at its own rate with the leg pairs in antiphase, keeping
    every channel separable from the pressure trace it produces.
    """
    mixed = MotionSpec(
        name="mixed",
        amp=np.array([0.5, 0.5, 0.6, 0.6, 0.5, 0.5, 0.35, 0.35]),
        freq=np.array([0.3, 0.3, 0.45, 0.45, 0.6, 0.6, 0.9, 0.9]),
        phase=np.array([0.0, np.pi, np.pi / 2, np.pi / 2,
                        0.0, np.pi, np.pi / 2, 3 * np.pi / 2]),
        duration_s=duration_s,
    )
    return [
        _group_motion("squat", 0.10, 0.50, 0.80, 0.40, 0.55, duration_s),
        _group_motion("arm_raise", 0.80, 0.30, 0.10, 0.05, 0.8, duration_s),
        _group_motion("bend", 0.15, 0.80, 0.20, 0.50, 0.4, duration_s),
        _group_motion("sway", 0.35, 0.35, 0.35, 0.35, 0.7, duration_s, antiphase=True),
        _group_motion("march", 0.10, 0.20, 0.70, 0.60, 1.0, duration_s, antiphase=True),
        mixed,
    ]


# ---------------------------------------------------------------------------
# The forward chain
# ---------------------------------------------------------------------------

def gen_activation(spec: MotionSpec, fs: float = PRESSURE_FS,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """(8, T) activation trace at the pressure frame rate.

    Each channel is a raised sinusoid plus noise, clamped to [0, 1]; the
    asymmetry factor then scales the right-side channels, so a factor of 0
    silences the right side exactly even in the presence of noise.
    """
    spec.validate()
    t_count = int(round(spec.duration_s * fs))
    t = np.arange(t_count) / fs
    base = spec.amp[:, None] * (
        0.5 + 0.5 * np.sin(2 * np.pi * spec.freq[:, None] * t + spec.phase[:, None])
    )
    if spec.noise_sigma > 0 and rng is not None:
        # Band-limited noise: white jitter would explode through the
        # second-difference acceleration (scaled by fs^2) and throw the
        # CoP off the feet, which no real muscle twitch does.
        kernel = np.hanning(9)[1:-1]
        kernel /= kernel.sum()
        white = rng.normal(0.0, 1.0, size=(base.shape[0], t_count + len(kernel) - 1))
        smooth = np.stack([np.convolve(w, kernel, mode="valid") for w in white])
        smooth /= np.sqrt((kernel**2).sum())
        base = base + spec.noise_sigma * smooth
    a = np.clip(base, 0.0, 1.0)
    if spec.asymmetry != 1.0:
        a[1::2] *= spec.asymmetry
        a = np.clip(a, 0.0, 1.0)
    return a


def com_from_activation(a: np.ndarray, body: BodyModel, fs: float = PRESSURE_FS):
    """Center of mass (T, 3) and its horizontal acceleration (T, 2).

    Effector i sits at rest_pos[i] + gains[i] * a[i, t] * directions[i];
    the mass-weighted mean gives the center of mass. Acceleration uses
    second differences, central in the interior and one-sided (the nearest
    interior estimate) at both ends.
    """
    body.validate()
    a = np.asarray(a, dtype=float)
    weights = (body.masses * body.gains / body.total_mass)[:, None] * body.directions
    rest_com = body.masses @ body.rest_pos / body.total_mass
    com = rest_com[None, :] + a.T @ weights    # (T, 3)

    t_count = com.shape[0]
    dt = 1.0 / fs
    acc = np.zeros((t_count, 2))
    if t_count >= 3:
        h = com[:, :2]
        acc[1:-1] = (h[2:] - 2 * h[1:-1] + h[:-2]) / dt**2
        acc[0] = (h[2] - 2 * h[1] + h[0]) / dt**2
        acc[-1] = (h[-1] - 2 * h[-2] + h[-3]) / dt**2
    return com, acc


def cop_from_com(com: np.ndarray, acc: np.ndarray, body: BodyModel) -> np.ndarray:
    """Center of pressure (T, 2): the inverted-pendulum deviation term
    -M*h*acc/F_z added to the horizontal CoM projection, with F_z = M*g.
    The mass cancels, leaving cop = com_xy - (h/g)*acc."""
    return np.asarray(com)[:, :2] - (body.com_height / body.gravity) * np.asarray(acc)


def pressure_from_cop(cop: np.ndarray, body: BodyModel, layout: SensorLayout,
                      rng: np.random.Generator | None = None,
                      noise_sigma_kg: float = 0.05) -> list[PressureFrame]:
    """Render sensor loads (kg) from the CoP trajectory.

    The lateral CoP position splits body weight between the feet
    (w_left = clamp(0.5 - cop_y / foot_separation, 0, 1)); within each
    foot a normalized Gaussian kernel around the local CoP shares the
    foot's load, so the 36 channels sum to the body mass exactly before
    noise. Gaussian kg noise is then added and values clamp to [0, 20].
    """
    layout.validate()
    body.validate()
    cop = np.asarray(cop, dtype=float)
    w_left = np.clip(0.5 - cop[:, 1] / layout.foot_separation, 0.0, 1.0)
    foot_kg = np.stack([w_left, 1.0 - w_left], axis=1) * body.total_mass  # (T, 2)

    vals = np.empty((len(cop), 36))
    for fi, center in enumerate(layout.foot_centers()):
        local = cop - center[None, :]
        d2 = ((local[:, None, :] - layout.coords[None, :, :]) ** 2).sum(axis=2)
        k = np.exp(-d2 / (2.0 * layout.sigma**2))
        k /= k.sum(axis=1, keepdims=True)
        vals[:, fi * 18:(fi + 1) * 18] = foot_kg[:, fi, None] * k

    if rng is not None and noise_sigma_kg > 0:
        vals = vals + rng.normal(0.0, noise_sigma_kg, size=vals.shape)
    vals = np.clip(vals, 0.0, 20.0)
    t_ms = np.arange(len(cop)) * FRAME_MS
    return [PressureFrame(int(t), row[:18].copy(), row[18:].copy())
            for t, row in zip(t_ms, vals)]


def cop_in_hull(cop: np.ndarray, layout: SensorLayout) -> np.ndarray:
    """Per-frame flag: CoP inside the hull of the two footprints.

    The two footprints are congruent axis-aligned rectangles side by side,
    so their union's convex hull is the joint bounding box.
    """
    cop = np.asarray(cop)
    xs, ys = layout.coords[:, 0], layout.coords[:, 1]
    half = layout.foot_separation / 2.0
    return (
        (cop[:, 0] >= xs.min()) & (cop[:, 0] <= xs.max())
        & (cop[:, 1] >= ys.min() - half) & (cop[:, 1] <= ys.max() + half)
    )


# ---------------------------------------------------------------------------
# Recording and dataset generation
# ---------------------------------------------------------------------------

def sample_bio(rng: np.random.Generator) -> BioProfile:
    """Draw a profile uniformly from the cohort attribute ranges."""
    return BioProfile(
        weight_kg=round(float(rng.uniform(*BIO_BOUNDS["weight_kg"])), 1),
        height_cm=round(float(rng.uniform(*BIO_BOUNDS["height_cm"])), 1),
        age_years=float(rng.integers(int(BIO_BOUNDS["age_years"][0]),
                                     int(BIO_BOUNDS["age_years"][1]) + 1)),
        shoe_size_eu=float(rng.integers(int(BIO_BOUNDS["shoe_size_eu"][0]),
                                        int(BIO_BOUNDS["shoe_size_eu"][1]) + 1)),
        gender_code=int(rng.integers(0, 2)),
    )


def gen_recording(bio: BioProfile, spec: MotionSpec, layout: SensorLayout,
                  seed, gain_scale=None, noise_sigma_kg: float = 0.05):
    """One synthetic recording.

    Returns a dict with the pressure frames, the 500 Hz sEMG stream
    (t_ms, microvolt array), the 20 Hz activation used to drive the body,
    and the CoP trajectory. The sEMG is the activation scaled to microvolts
    and linearly interpolated to 500 Hz, which exercises the synchronizer
    exactly the way a real recording would.
    """
    rng = np.random.default_rng(seed)
    body = BodyModel.from_bio(bio, gain_scale=gain_scale)
    a = gen_activation(spec, rng=rng)
    com, acc = com_from_activation(a, body)
    cop = cop_from_com(com, acc, body)
    frames = pressure_from_cop(cop, body, layout, rng=rng, noise_sigma_kg=noise_sigma_kg)

    t_count = a.shape[1]
    t20_s = np.arange(t_count) / PRESSURE_FS
    emg_t = np.arange(0, (t_count - 1) * FRAME_MS + 1, 2, dtype=np.int64)
    emg_s = emg_t / 1000.0
    emg_uv = np.stack([np.interp(emg_s, t20_s, a[i] * 1000.0) for i in range(8)], axis=1)
    return {
        "frames": frames,
        "emg": (emg_t, emg_uv),
        "activation": a,
        "cop": cop,
        "in_hull": cop_in_hull(cop, layout),
    }


def gen_dataset(out_dir, n_users: int = 10, motions=None, seed: int = 0,
                duration_s: float = 60.0, noise_sigma_kg: float = 0.05,
                random_asymmetry: float = 0.0) -> dict:
    """Write a labeled multi-user dataset in the package file formats.

    Per user, bio attributes and gait style (gain scaling, phase offset)
    are sampled so users differ; per recording, noise is seeded by
    (seed, user, motion) so regeneration is bit-identical. With
    random_asymmetry > 0, that fraction of recordings replaces the
    motion's asymmetry factor with a uniform draw from [0, 1), giving
    datasets where left/right imbalance varies and can be learned.

    Returns a summary dict including the manifest path and the number of
    frames whose CoP left the footprint hull (expected 0 for the default
    motion library).
    """
    if n_users < 2:
        raise ConfigError(f"need at least 2 users, got {n_users}")
    if motions is None:
        motions = default_motions(duration_s)
    os.makedirs(out_dir, exist_ok=True)
    layout = SensorLayout.default()
    layout.to_json(os.path.join(out_dir, "layout.json"))

    entries = []
    hull_violations = 0
    for u in range(n_users):
        user_id = f"u{u:02d}"
        urng = np.random.default_rng([seed, 7, u])
        bio = sample_bio(urng)
        gain_scale = urng.uniform(0.8, 1.2) * urng.uniform(0.9, 1.1, size=8)
        phase_off = urng.uniform(0.0, 2 * np.pi)
        write_bio_json(os.path.join(out_dir, f"{user_id}.bio.json"), bio)

        for mi, motion in enumerate(motions):
            spec = replace(motion, phase=motion.phase + phase_off,
                           duration_s=duration_s)
            arng = np.random.default_rng([seed, 11, u, mi])
            if random_asymmetry > 0 and arng.random() < random_asymmetry:
                spec = replace(spec, asymmetry=float(arng.uniform(0.0, 1.0)))
            rec = gen_recording(bio, spec, layout, seed=[seed, u, mi],
                                gain_scale=gain_scale, noise_sigma_kg=noise_sigma_kg)
            hull_violations += int((~rec["in_hull"]).sum())

            stem = f"{user_id}_{spec.name}"
            write_pressure_csv(os.path.join(out_dir, stem + ".pressure.csv"),
                               rec["frames"])
            write_emg_csv(os.path.join(out_dir, stem + ".emg.csv"),
                          rec["emg"][0], rec["emg"][1])
            entries.append({
                "pressure_csv": stem + ".pressure.csv",
                "emg_csv": stem + ".emg.csv",
                "bio_json": f"{user_id}.bio.json",
                "user_id": user_id,
                "motion_label": spec.name,
            })

    manifest_path = os.path.join(out_dir, "manifest.json")
    write_manifest(manifest_path, entries)
    return {
        "manifest": manifest_path,
        "n_users": n_users,
        "n_recordings": len(entries),
        "motions": [m.name for m in motions],
        "hull_violation_frames": hull_violations,
    }
