"""Recording types, file formats, synchronization, normalization, windowing.

Units convention: raw pressure is kg per channel in [0, 20], raw sEMG is
microvolts in [0, 1000]. Normalized pressure lives in [-1, 1], normalized
activation in [0, 1]; both maps are fixed linear bijections of the physical
range (never per-window statistics, which would break streaming reuse and
the magnitude semantics of the scaling augmentation).
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    DataFormatError,
    OutOfRangeError,
    SequencingError,
)

FRAME_MS = 50                 # 20 Hz pressure stream
PRESSURE_RATE_HZ = 20.0
EMG_RATE_HZ = 500.0
CHANNELS_PER_FOOT = 18
N_CHANNELS = 2 * CHANNELS_PER_FOOT
N_MUSCLES = 8
PRESSURE_MAX_KG = 20.0
EMG_MAX_UV = 1000.0

# Canonical muscle-channel order used by every producer and report.
MUSCLE_NAMES = (
    "l_bicep", "r_bicep",
    "l_back", "r_back",
    "l_quad", "r_quad",
    "l_ham", "r_ham",
)
# Left/right channel pairs, in MUSCLE_NAMES order.
MUSCLE_PAIRS = ((0, 1), (2, 3), (4, 5), (6, 7))

PRESSURE_HEADER = "t_ms," + ",".join(
    f"{side}{i:02d}" for side in ("L", "R") for i in range(CHANNELS_PER_FOOT)
)
EMG_HEADER = "t_ms," + ",".join(f"m{i}" for i in range(N_MUSCLES))

# Cohort bounds used to min-max the five biographical inputs.
BIO_BOUNDS = {
    "weight_kg": (39.0, 83.0),
    "height_cm": (150.0, 186.0),
    "age_years": (22.0, 37.0),
    "shoe_size_eu": (35.0, 47.0),
}


@dataclass
class PressureFrame:
    """One 36-channel pressure reading (kg) at a 20 Hz timestamp."""

    t_ms: int
    left: np.ndarray   # (18,) kg
    right: np.ndarray  # (18,) kg

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.left, self.right])


@dataclass
class EmgSample:
    """One 8-channel sEMG reading (microvolts) from the 500 Hz stream."""

    t_ms: int
    channels: np.ndarray  # (8,) µV, MUSCLE_NAMES order


@dataclass
class BioProfile:
    """The five readily available user attributes conditioning the network."""

    weight_kg: float
    height_cm: float
    age_years: float
    shoe_size_eu: float
    gender_code: int  # 0 or 1

    def validate(self):
        vals = [self.weight_kg, self.height_cm, self.age_years,
                self.shoe_size_eu, self.gender_code]
        if not all(np.isfinite(v) for v in vals):
            raise OutOfRangeError("bio profile contains a non-finite value")
        if self.gender_code not in (0, 1):
            raise OutOfRangeError(f"gender_code must be 0 or 1, got {self.gender_code}")

    def to_dict(self) -> dict:
        return {
            "weight_kg": self.weight_kg,
            "height_cm": self.height_cm,
            "age_years": self.age_years,
            "shoe_size_eu": self.shoe_size_eu,
            "gender_code": self.gender_code,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BioProfile":
        try:
            return cls(
                weight_kg=float(d["weight_kg"]),
                height_cm=float(d["height_cm"]),
                age_years=float(d["age_years"]),
                shoe_size_eu=float(d["shoe_size_eu"]),
                gender_code=int(d["gender_code"]),
            )
        except KeyError as e:
            raise DataFormatError(f"bio profile missing key {e}") from e


def normalize_bio(bio: BioProfile) -> np.ndarray:
    """Min-max the five attributes to [0, 1] (inputs clamped to cohort bounds)."""
    bio.validate()
    out = np.empty(5)
    for i, key in enumerate(("weight_kg", "height_cm", "age_years", "shoe_size_eu")):
        lo, hi = BIO_BOUNDS[key]
        out[i] = (min(max(getattr(bio, key), lo), hi) - lo) / (hi - lo)
    out[4] = float(bio.gender_code)
    return out


@dataclass
class SyncedRecording:
    """Pressure and activation sharing identical 20 Hz timestamps.

    Raw recordings hold kg / µV; after :func:`normalize` the arrays hold
    [-1, 1] pressure and [0, 1] activation and ``normalized`` is True.
    """

    t_ms: np.ndarray        # (T,) int
    pressure: np.ndarray    # (T, 36)
    activation: np.ndarray  # (T, 8)
    user_id: str = ""
    motion_label: str = ""
    bio: BioProfile | None = None
    normalized: bool = False
    split_tag: str | None = None  # provenance set by train.split

    @property
    def n_frames(self) -> int:
        return len(self.t_ms)


@dataclass
class TrainingWindow:
    """One synchronized, normalized (x, y) pair plus its metadata."""

    x: np.ndarray          # (36, W) normalized pressure in [-1, 1]
    y: np.ndarray          # (8, W) normalized activation in [0, 1]
    user_id: str
    motion_label: str
    bio_norm: np.ndarray   # (5,) in [0, 1]
    split_tag: str | None = None


# ---------------------------------------------------------------------------
# CSV / JSON formats
# ---------------------------------------------------------------------------

def _load_table(path, header: str, n_cols: int, kind: str) -> tuple[np.ndarray, np.ndarray]:
    """Shared CSV reader: exact-header check, strictly increasing t_ms."""
    with open(path, "r") as f:
        first = f.readline().rstrip("\n").rstrip("\r")
        if first != header:
            raise DataFormatError(
                f"{kind} file {path!r}: malformed header {first!r}, expected {header!r}"
            )
        try:
            body = np.loadtxt(f, delimiter=",", ndmin=2)
        except ValueError as e:
            raise DataFormatError(f"{kind} file {path!r}: {e}") from e
    if body.size == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, n_cols))
    if body.shape[1] != n_cols + 1:
        raise DataFormatError(
            f"{kind} file {path!r}: expected {n_cols + 1} columns, got {body.shape[1]}"
        )
    t = body[:, 0].astype(np.int64)
    if np.any(np.diff(t) <= 0):
        bad = int(np.argmax(np.diff(t) <= 0)) + 1
        raise SequencingError(
            f"{kind} file {path!r}: t_ms not strictly increasing at data row {bad}"
        )
    return t, body[:, 1:]


def _check_range(values: np.ndarray, lo: float, hi: float, columns, path, kind: str):
    bad = (values < lo) | (values > hi) | ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise OutOfRangeError(
            f"{kind} file {path!r}: value {values[r, c]} in column "
            f"{columns[c]!r}, data row {r} outside [{lo}, {hi}]"
        )


def load_pressure_csv(path) -> list[PressureFrame]:
    """Parse a pressure CSV (header ``t_ms,L00..L17,R00..R17``, kg values)."""
    t, vals = _load_table(path, PRESSURE_HEADER, N_CHANNELS, "pressure")
    cols = PRESSURE_HEADER.split(",")[1:]
    _check_range(vals, 0.0, PRESSURE_MAX_KG, cols, path, "pressure")
    return [
        PressureFrame(int(ti), row[:CHANNELS_PER_FOOT].copy(), row[CHANNELS_PER_FOOT:].copy())
        for ti, row in zip(t, vals)
    ]


def load_emg_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse an sEMG CSV (header ``t_ms,m0..m7``) into (t_ms, (N,8) µV)."""
    t, vals = _load_table(path, EMG_HEADER, N_MUSCLES, "emg")
    cols = EMG_HEADER.split(",")[1:]
    _check_range(vals, 0.0, EMG_MAX_UV, cols, path, "emg")
    return t, vals


def _write_table(path, header: str, t_ms: np.ndarray, values: np.ndarray):
    buf = io.StringIO()
    buf.write(header + "\n")
    for ti, row in zip(t_ms, values):
        buf.write(str(int(ti)) + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
    with open(path, "w") as f:
        f.write(buf.getvalue())


def write_pressure_csv(path, frames):
    """Write PressureFrames (or a (t, (T,36)) pair) with fixed 6-decimal kg."""
    if isinstance(frames, tuple):
        t, vals = frames
    else:
        t = np.array([f.t_ms for f in frames])
        vals = np.stack([f.as_vector() for f in frames]) if len(frames) else np.empty((0, N_CHANNELS))
    _write_table(path, PRESSURE_HEADER, t, vals)


def write_emg_csv(path, t_ms, channels_uv):
    _write_table(path, EMG_HEADER, t_ms, channels_uv)


def load_bio_json(path) -> BioProfile:
    with open(path) as f:
        return BioProfile.from_dict(json.load(f))


def write_bio_json(path, bio: BioProfile):
    with open(path, "w") as f:
        json.dump(bio.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Synchronization and normalization
# ---------------------------------------------------------------------------

def synchronize(pressure, emg, user_id="", motion_label="", bio=None) -> SyncedRecording:
    """Downsample sEMG onto the 20 Hz pressure timeline.

    For each pressure frame at time t, the activation is the mean of all
    sEMG samples with t_ms in [t-25, t+25); frames without any sample in
    that interval are dropped, which also restricts the output to the
    overlap of the two streams.

    ``emg`` is either a sequence of :class:`EmgSample` or a pre-parsed
    ``(t_ms, (N, 8))`` array pair as returned by :func:`load_emg_csv`.
    """
    if isinstance(emg, tuple):
        emg_t, emg_v = emg
        emg_t = np.asarray(emg_t, dtype=np.int64)
        emg_v = np.asarray(emg_v, dtype=float)
    else:
        emg = list(emg)
        emg_t = np.array([s.t_ms for s in emg], dtype=np.int64)
        emg_v = np.array([s.channels for s in emg], dtype=float)

    pressure = list(pressure)
    if not pressure or emg_t.size == 0:
        raise AlignmentError("cannot synchronize empty streams")

    order = np.argsort(emg_t, kind="stable")
    emg_t, emg_v = emg_t[order], emg_v[order]
    p_t = np.array([f.t_ms for f in pressure], dtype=np.int64)
    p_v = np.stack([f.as_vector() for f in pressure])

    half = FRAME_MS // 2
    lo = np.searchsorted(emg_t, p_t - half, side="left")
    hi = np.searchsorted(emg_t, p_t + half, side="left")
    keep = hi > lo
    if not keep.any():
        raise AlignmentError("pressure and sEMG streams have empty overlap")

    csum = np.concatenate([np.zeros((1, emg_v.shape[1])), np.cumsum(emg_v, axis=0)])
    act = np.zeros((len(pressure), emg_v.shape[1]))
    act[keep] = (csum[hi[keep]] - csum[lo[keep]]) / (hi[keep] - lo[keep])[:, None]

    t_out = p_t[keep]
    gaps = np.diff(t_out)
    if gaps.size and gaps.max() > 2 * FRAME_MS:
        at = int(np.argmax(gaps > 2 * FRAME_MS))
        raise AlignmentError(
            f"gap of {gaps[at]} ms after t={t_out[at]} ms exceeds one missing frame"
        )
    return SyncedRecording(
        t_ms=t_out, pressure=p_v[keep], activation=act[keep],
        user_id=user_id, motion_label=motion_label, bio=bio,
    )


def normalize(rec: SyncedRecording) -> SyncedRecording:
    """Map kg -> [-1, 1] and µV -> [0, 1] with the fixed linear bijection."""
    if rec.normalized:
        raise ConfigError("recording is already normalized")
    if rec.pressure.size and (rec.pressure.min() < 0 or rec.pressure.max() > PRESSURE_MAX_KG):
        raise OutOfRangeError("pressure outside [0, 20] kg; cannot normalize")
    if rec.activation.size and (rec.activation.min() < 0 or rec.activation.max() > EMG_MAX_UV):
        raise OutOfRangeError("sEMG outside [0, 1000] µV; cannot normalize")
    return replace(
        rec,
        pressure=2.0 * (rec.pressure / PRESSURE_MAX_KG) - 1.0,
        activation=rec.activation / EMG_MAX_UV,
        normalized=True,
    )


def denormalize(rec: SyncedRecording) -> SyncedRecording:
    """Inverse of :func:`normalize`."""
    if not rec.normalized:
        raise ConfigError("recording is not normalized")
    return replace(
        rec,
        pressure=(rec.pressure + 1.0) * (PRESSURE_MAX_KG / 2.0),
        activation=rec.activation * EMG_MAX_UV,
        normalized=False,
    )


def window(rec: SyncedRecording, length: int = 20, stride: int = 10) -> list[TrainingWindow]:
    """Cut a normalized recording into fixed-length windows.

    Windows start at 0, stride, 2*stride, ...; only full windows are
    emitted, so a recording shorter than ``length`` yields an empty list.
    """
    if length < 2:
        raise ConfigError(f"window length must be >= 2, got {length}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if not rec.normalized:
        raise ConfigError("window() expects a normalized recording")
    if rec.bio is None:
        raise ConfigError("recording has no bio profile; cannot build windows")
    bio_norm = normalize_bio(rec.bio).astype(np.float32)
    out = []
    for start in range(0, rec.n_frames - length + 1, stride):
        out.append(TrainingWindow(
            x=np.ascontiguousarray(rec.pressure[start:start + length].T, dtype=np.float32),
            y=np.ascontiguousarray(rec.activation[start:start + length].T, dtype=np.float32),
            user_id=rec.user_id,
            motion_label=rec.motion_label,
            bio_norm=bio_norm,
            split_tag=rec.split_tag,
        ))
    return out


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

def load_manifest(path) -> list[dict]:
    """Read a dataset manifest; returns entries with paths resolved."""
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict) or "recordings" not in doc:
        raise DataFormatError(f"manifest {path!r} has no 'recordings' list")
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    for i, e in enumerate(doc["recordings"]):
        try:
            entries.append({
                "pressure_csv": os.path.join(base, e["pressure_csv"]),
                "emg_csv": os.path.join(base, e["emg_csv"]),
                "bio_json": os.path.join(base, e["bio_json"]),
                "user_id": str(e["user_id"]),
                "motion_label": str(e["motion_label"]),
            })
        except KeyError as k:
            raise DataFormatError(f"manifest entry {i} missing key {k}") from k
    return entries


def write_manifest(path, entries):
    with open(path, "w") as f:
        json.dump({"recordings": list(entries)}, f, indent=2, sort_keys=True)
        f.write("\n")


def load_recording(entry: dict) -> SyncedRecording:
    """Load and synchronize one manifest entry (raw physical units)."""
    frames = load_pressure_csv(entry["pressure_csv"])
    emg = load_emg_csv(entry["emg_csv"])
    bio = load_bio_json(entry["bio_json"])
    return synchronize(frames, emg, user_id=entry["user_id"],
                       motion_label=entry["motion_label"], bio=bio)


def load_dataset(manifest_path) -> list[SyncedRecording]:
    """Load every manifest entry, synchronized and normalized."""
    return [normalize(load_recording(e)) for e in load_manifest(manifest_path)]
