"""Split protocols and the Adam training loop.

Splitting happens before windowing ever reaches the optimizer: windows and
recordings carry a split tag, and fit() refuses anything tagged as test
data, so held-out material can never leak into a gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .augment import AugmentConfig, augment_dataset
from .errors import ConfigError, NumericError, TrainingError
from .model import (
    ModelConfig,
    ModelParams,
    gradients,
    init_params,
    is_weight_matrix,
    loss_total,
    _forward,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    """Optimization settings plus the ablation switches."""

    lr: float = 1e-4
    batch_size: int = 512
    l2_coeff: float = 0.01
    epochs: int = 50
    seed: int = 0
    val_fraction: float = 0.1
    no_mask: bool = False
    no_film: bool = False
    no_scale_aug: bool = False
    no_shift_aug: bool = False
    no_smooth_loss: bool = False
    log_every: int = 0   # print a line every N epochs; 0 keeps quiet

    def validate(self):
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class SplitSpec:
    """Which recordings are held out: by user, by motion, or at random."""

    mode: str              # "louo", "lomo" or "random"
    held_out: str          # user id / motion label / test fraction
    seed: int = 0

    _ALIASES = {
        "louo": "louo", "leave_one_user_out": "louo",
        "lomo": "lomo", "leave_one_motion_out": "lomo",
        "random": "random",
    }

    def __post_init__(self):
        try:
            self.mode = self._ALIASES[self.mode]
        except KeyError:
            raise ConfigError(f"unknown split mode {self.mode!r}") from None

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "SplitSpec":
        """Parse 'louo:<user>', 'lomo:<motion>' or 'random:<fraction>'."""
        mode, sep, held = str(text).partition(":")
        if not sep or not held:
            raise ConfigError(f"split spec {text!r} is not '<mode>:<held-out>'")
        return cls(mode=mode, held_out=held, seed=seed)


def split(items, spec: SplitSpec):
    """Partition recordings or windows into (train, test) by the split rule.

    The two lists are disjoint, cover the input exactly, and every returned
    item carries split_tag 'train' or 'test'. Random mode holds out a
    fraction of recordings, never slicing inside one, so overlapping
    windows of a recording stay on one side.
    """
    items = list(items)
    if not items:
        raise ConfigError("cannot split an empty dataset")

    if spec.mode in ("louo", "lomo"):
        attr = "user_id" if spec.mode == "louo" else "motion_label"
        ids = {getattr(it, attr) for it in items}
        if spec.held_out not in ids:
            raise ConfigError(
                f"held-out {attr} {spec.held_out!r} not in dataset ({sorted(ids)})"
            )
        is_test = [getattr(it, attr) == spec.held_out for it in items]
    else:
        try:
            frac = float(spec.held_out)
        except ValueError:
            raise ConfigError(f"random split needs a fraction, got {spec.held_out!r}") from None
        if not (0.0 < frac < 1.0):
            raise ConfigError(f"random split fraction must be in (0, 1), got {frac}")
        keys = sorted({(it.user_id, it.motion_label) for it in items})
        order = np.random.default_rng(spec.seed).permutation(len(keys))
        n_test = max(1, int(round(frac * len(keys))))
        if n_test >= len(keys):
            raise ConfigError("random split leaves no training recordings")
        test_keys = {keys[i] for i in order[:n_test]}
        is_test = [(it.user_id, it.motion_label) in test_keys for it in items]

    train = [replace(it, split_tag="train") for it, t in zip(items, is_test) if not t]
    test = [replace(it, split_tag="test") for it, t in zip(items, is_test) if t]
    return train, test


def _stack(windows, dtype=np.float32):
    x = np.stack([w.x for w in windows]).astype(dtype)
    y = np.stack([w.y for w in windows]).astype(dtype)
    b = np.stack([w.bio_norm for w in windows]).astype(dtype)
    return x, y, b


def _mean_loss(params: ModelParams, x, y, b, lam: float, chunk: int = 512) -> float:
    """Mean loss_total over a window set, evaluated without dropout."""
    total, n = 0.0, 0
    for i in range(0, len(x), chunk):
        xb, yb, bb = x[i:i + chunk], y[i:i + chunk], b[i:i + chunk]
        yhat, _ = _forward(params, xb, bb)
        total += loss_total(yhat, yb, lam) * len(xb)
        n += len(xb)
    return total / n


def _val_slice(windows, fraction: float, seed: int):
    """Hold out a fraction of recordings (never single windows) for selection."""
    keys = sorted({(w.user_id, w.motion_label) for w in windows})
    if fraction <= 0 or len(keys) < 2:
        return list(windows), []
    order = np.random.default_rng([seed, 101]).permutation(len(keys))
    n_val = min(max(1, int(round(fraction * len(keys)))), len(keys) - 1)
    val_keys = {keys[i] for i in order[:n_val]}
    train = [w for w in windows if (w.user_id, w.motion_label) not in val_keys]
    val = [w for w in windows if (w.user_id, w.motion_label) in val_keys]
    return train, val


def fit(windows, cfg: TrainConfig, model_cfg: ModelConfig,
        augment_cfg: AugmentConfig | None = None,
        init: ModelParams | None = None):
    """Train on the given windows; returns (best params, loss trace).

    The trace is a list of {'epoch', 'train_loss', 'val_loss'} dicts, one
    per epoch. Model selection keeps the parameters of the epoch with the
    lowest validation loss, where validation is a held-in slice of whole
    recordings (or the training loss when the set is a single recording).
    When augment_cfg is given, each epoch trains on the originals plus
    freshly drawn augmented copies; the validation slice is never augmented.
    Fully deterministic for a fixed (cfg.seed, augment seed, input order).
    """
    cfg.validate()
    model_cfg.validate()
    windows = list(windows)
    if not windows:
        raise ConfigError("empty training set")
    for w in windows:
        if w.split_tag == "test":
            raise ConfigError(
                f"window of ({w.user_id}, {w.motion_label}) is tagged as test "
                "data; it must never reach the optimizer"
            )

    run_cfg = replace(
        model_cfg,
        use_mask=model_cfg.use_mask and not cfg.no_mask,
        use_film=model_cfg.use_film and not cfg.no_film,
    )
    lam = 0.0 if cfg.no_smooth_loss else run_cfg.lambda_smooth

    train_wins, val_wins = _val_slice(windows, cfg.val_fraction, cfg.seed)
    aug = None
    if augment_cfg is not None and augment_cfg.copies > 0:
        aug = replace(
            augment_cfg,
            p_high=0.0 if cfg.no_scale_aug else augment_cfg.p_high,
            p_low=0.0 if cfg.no_scale_aug else augment_cfg.p_low,
            shift_prob=0.0 if cfg.no_shift_aug else augment_cfg.shift_prob,
        )

    x, y, b = _stack(train_wins)
    if val_wins:
        xv, yv, bv = _stack(val_wins)

    params = init.copy() if init is not None else init_params(run_cfg, seed=cfg.seed)
    if init is not None and init.config.to_dict() != run_cfg.to_dict():
        raise ConfigError("init params config does not match the requested model config")
    m_state = {k: np.zeros_like(v) for k, v in params.items()}
    v_state = {k: np.zeros_like(v) for k, v in params.items()}
    step = 0

    best_val = np.inf
    best_params = params.copy()
    best_epoch = -1
    trace = []
    for epoch in range(cfg.epochs):
        if aug is not None:
            # fresh augmented copies every epoch; derived seed keeps runs
            # reproducible while the optimizer never sees the same copy twice
            epoch_seed = int(np.random.SeedSequence(
                [cfg.seed, 4, epoch]).generate_state(1)[0])
            ex, ey, eb = _stack(augment_dataset(train_wins, aug, seed=epoch_seed))
        else:
            ex, ey, eb = x, y, b
        n = len(ex)
        perm = np.random.default_rng([cfg.seed, 2, epoch]).permutation(n)
        drop_rng = np.random.default_rng([cfg.seed, 3, epoch])
        epoch_loss, seen = 0.0, 0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            try:
                loss, grads = gradients(
                    params, ex[idx], eb[idx], ey[idx],
                    lam=lam, training=True, rng=drop_rng,
                )
            except NumericError as exc:
                raise TrainingError(f"diverged at epoch {epoch}: {exc}", epoch=epoch) from exc
            epoch_loss += loss * len(idx)
            seen += len(idx)
            if cfg.lr == 0:
                continue
            step += 1
            bc1 = 1.0 - ADAM_BETA1 ** step
            bc2 = 1.0 - ADAM_BETA2 ** step
            for name, g in grads.items():
                if cfg.l2_coeff and is_weight_matrix(name):
                    g = g + cfg.l2_coeff * params[name]
                m_state[name] = ADAM_BETA1 * m_state[name] + (1 - ADAM_BETA1) * g
                v_state[name] = ADAM_BETA2 * v_state[name] + (1 - ADAM_BETA2) * (g * g)
                update = (m_state[name] / bc1) / (np.sqrt(v_state[name] / bc2) + ADAM_EPS)
                params[name] = params[name] - cfg.lr * update

        train_loss = epoch_loss / seen
        val_loss = _mean_loss(params, xv, yv, bv, lam) if val_wins else train_loss
        if not np.isfinite(val_loss):
            raise TrainingError(f"diverged at epoch {epoch}: non-finite validation loss",
                                epoch=epoch)
        trace.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            best_epoch = epoch
        if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1):
            print(f"epoch {epoch:3d}  train {train_loss:.6f}  val {val_loss:.6f}")

    best_params.meta = {
        "best_epoch": best_epoch,
        "best_val_loss": float(best_val),
        "epochs": cfg.epochs,
        "train_config": cfg.to_dict(),
        "n_train_windows": int(n),
        "n_val_windows": int(len(val_wins)),
    }
    return best_params, trace


def save_trace_csv(path, trace):
    with open(path, "w") as f:
        f.write("epoch,train_loss,val_loss\n")
        for row in trace:
            f.write(f"{row['epoch']},{row['train_loss']:.8f},{row['val_loss']:.8f}\n")


def load_trace_csv(path):
    trace = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "epoch,train_loss,val_loss":
            raise ConfigError(f"unexpected trace header {header!r}")
        for line in f:
            e, tl, vl = line.strip().split(",")
            trace.append({"epoch": int(e), "train_loss": float(tl), "val_loss": float(vl)})
    return trace
