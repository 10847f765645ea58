"""Training-time pressure augmentations: per-channel scaling, temporal shift.

Both operate on normalized 36xW windows but reason in physical units:
scaling multiplies kg values (so zero pressure stays exactly zero and
clipping happens at the 20 kg sensor ceiling), shifting slides each
channel along the 20 Hz time axis with edge replication. Targets, bio and
identity metadata are never touched; augmentation changes what the network
sees, not what it must predict.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import PRESSURE_MAX_KG, TrainingWindow
from .errors import ConfigError

_HALF_RANGE = PRESSURE_MAX_KG / 2.0  # kg per unit of normalized pressure


@dataclass
class AugmentConfig:
    """Knobs for both augmentations and for dataset expansion."""

    alpha_min: float = 0.8
    alpha_max: float = 1.2
    magnitude_threshold_kg: float = 0.3
    p_high: float = 0.8   # scaling probability for channels above the threshold
    p_low: float = 0.2    # and for quiet channels
    shift_prob: float = 0.5
    max_shift: int = 5
    copies: int = 2
    rng_seed: int = 0
    shift_first: bool = True  # composition order, recorded for ablation

    def validate(self):
        if not (0 < self.alpha_min <= self.alpha_max):
            raise ConfigError(f"bad alpha range [{self.alpha_min}, {self.alpha_max}]")
        for name in ("p_high", "p_low", "shift_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name}={v} outside [0, 1]")
        if self.max_shift < 1:
            raise ConfigError(f"max_shift must be >= 1, got {self.max_shift}")
        if self.copies < 0:
            raise ConfigError(f"copies must be >= 0, got {self.copies}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


def scale_augment(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Randomly rescale the amplitude of individual pressure channels.

    Channel selection is biased toward informative channels: those whose
    in-window peak-to-peak range exceeds 0.3 kg are scaled with probability
    p_high, the rest with p_low. A selected channel is multiplied by
    alpha ~ U[alpha_min, alpha_max] in kg, clipped to [0, 20] kg, and
    renormalized. Unselected channels are copied bit for bit.
    """
    x = np.asarray(x)
    ptp_kg = np.ptp(x.astype(np.float64), axis=1) * _HALF_RANGE
    p_chan = np.where(ptp_kg > cfg.magnitude_threshold_kg, cfg.p_high, cfg.p_low)
    # Fixed draw order (selection vector then alpha vector, both full
    # length) keeps the stream layout independent of what gets selected.
    selected = rng.random(x.shape[0]) < p_chan
    alpha = rng.uniform(cfg.alpha_min, cfg.alpha_max, size=x.shape[0])

    out = x.copy()
    if selected.any():
        kg = (x[selected].astype(np.float64) + 1.0) * _HALF_RANGE
        kg = np.clip(kg * alpha[selected, None], 0.0, PRESSURE_MAX_KG)
        out[selected] = (kg / _HALF_RANGE - 1.0).astype(x.dtype)
    return out


def shift_augment(x: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Randomly slide each pressure channel in time, replicating the edge.

    Independently per channel: with probability shift_prob the channel
    moves by k ~ U{1..max_shift} frames, delayed or advanced with equal
    probability; vacated frames repeat the channel's first (delay) or last
    (advance) value. Only the pressure moves: targets stay where they are.
    """
    x = np.asarray(x)
    n_chan, n_t = x.shape
    if cfg.max_shift >= n_t:
        raise ConfigError(f"max_shift {cfg.max_shift} must be < window length {n_t}")
    apply = rng.random(n_chan) < cfg.shift_prob
    ks = rng.integers(1, cfg.max_shift + 1, size=n_chan)
    fwd = rng.integers(0, 2, size=n_chan).astype(bool)

    # Per-channel gather indices: clamped arange(n_t) -/+ k implements the
    # shift and the edge replication in one step.
    t = np.arange(n_t)[None, :]
    k = np.where(apply, ks, 0)[:, None]
    idx = np.where(fwd[:, None], t - k, t + k).clip(0, n_t - 1)
    return np.take_along_axis(x, idx, axis=1)


def augment_window(win: TrainingWindow, cfg: AugmentConfig,
                   rng: np.random.Generator) -> TrainingWindow:
    """Produce one augmented variant of a window (x changes, y never does)."""
    x = win.x
    if cfg.shift_first:
        x = scale_augment(shift_augment(x, cfg, rng), cfg, rng)
    else:
        x = shift_augment(scale_augment(x, cfg, rng), cfg, rng)
    return replace(win, x=x, y=win.y.copy())


def augment_dataset(windows, cfg: AugmentConfig, seed: int | None = None) -> list[TrainingWindow]:
    """Return the original windows plus cfg.copies augmented variants of each.

    Output order is [originals..., copy-0 of each, copy-1 of each, ...] and
    has exactly (1 + copies) * len(windows) entries. Every variant gets its
    own RNG keyed by (seed, copy, window index), so the result is a pure
    function of the inputs no matter how iteration is ordered or
    parallelized.
    """
    cfg.validate()
    base = cfg.rng_seed if seed is None else seed
    windows = list(windows)
    out = list(windows)
    for c in range(cfg.copies):
        for i, win in enumerate(windows):
            rng = np.random.default_rng([base, c, i])
            out.append(augment_window(win, cfg, rng))
    return out
