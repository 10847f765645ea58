"""Metrics, test-set evaluation, and the left/right imbalance score.

Evaluation runs the model over every stride-1 window of a recording and
assembles one prediction per frame using the last time step of each
window; the first window supplies the leading frames. This is exactly what
the streaming path emits, so batch reports and live inference agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MUSCLE_NAMES, MUSCLE_PAIRS, SyncedRecording
from .errors import ConfigError, OutOfRangeError, UndefinedCorrelationError
from .model import ModelParams, _forward

IMBALANCE_EPS = 1e-3


def rmse(y, y_hat) -> float:
    """Root-mean-square error between two equally long series."""
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ConfigError(f"series lengths differ: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ConfigError("rmse of empty series")
    d = y - y_hat
    return float(np.sqrt(np.mean(d * d)))


def pearson(y, y_hat) -> float:
    """Sample Pearson correlation; zero-variance input is undefined."""
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ConfigError(f"series lengths differ: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise ConfigError("pearson needs at least 2 samples")
    a = y - y.mean()
    b = y_hat - y_hat.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedCorrelationError("zero-variance series has no correlation")
    return float((a @ b) / (na * nb))


def imbalance_per_pair(activations) -> np.ndarray:
    """Time-averaged |L-R|/(L+R) for the four left/right muscle pairs.

    Frames where a pair's total activation is at most 1e-3 count as zero
    imbalance: a relaxed pair is balanced, not undefined.
    """
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != len(MUSCLE_NAMES):
        raise ConfigError(f"expected (8, T) activations, got {a.shape}")
    if a.shape[1] < 1:
        raise ConfigError("imbalance of an empty series")
    if a.min() < 0:
        raise OutOfRangeError(f"negative activation {a.min()} in imbalance input")
    out = np.empty(len(MUSCLE_PAIRS))
    for i, (l, r) in enumerate(MUSCLE_PAIRS):
        tot = a[l] + a[r]
        ratio = np.where(tot > IMBALANCE_EPS, np.abs(a[l] - a[r]) / np.maximum(tot, IMBALANCE_EPS), 0.0)
        out[i] = ratio.mean()
    return out


def imbalance_score(activations) -> float:
    """Scalar left/right asymmetry in [0, 1]: mean over time and pairs."""
    return float(imbalance_per_pair(activations).mean())


# ---------------------------------------------------------------------------
# Recording-level prediction and reports
# ---------------------------------------------------------------------------

def predict_recording(params: ModelParams | None, rec: SyncedRecording,
                      chunk: int = 256) -> np.ndarray:
    """Per-frame activation estimates (T, 8) for one normalized recording.

    Runs every stride-1 window; frame t >= W-1 takes the last step of the
    window ending at t, the leading W-1 frames take the first window's
    early steps. Inference runs in 64-bit so results do not depend on how
    windows are batched. params=None selects the ground-truth oracle, which
    echoes the recording's own activations (a metric-pipeline self check).
    """
    if params is None:
        if not rec.normalized:
            raise ConfigError("predict_recording expects a normalized recording")
        return np.asarray(rec.activation, dtype=np.float64).copy()
    cfg = params.config
    w = cfg.window_len
    if not rec.normalized:
        raise ConfigError("predict_recording expects a normalized recording")
    if rec.bio is None:
        raise ConfigError("recording has no bio profile")
    if rec.n_frames < w:
        raise ConfigError(f"recording has {rec.n_frames} frames, needs >= {w}")

    from .data import normalize_bio  # local import avoids a cycle at module load

    p64 = params if params.tensors["pos"].dtype == np.float64 else params.astype(np.float64)
    pressure = np.asarray(rec.pressure, dtype=np.float64)
    bio = normalize_bio(rec.bio).astype(np.float64)
    t_total = rec.n_frames
    windows = np.lib.stride_tricks.sliding_window_view(pressure, w, axis=0)  # (N, 36, W)
    n = windows.shape[0]

    preds = np.empty((t_total, cfg.n_muscles))
    for lo in range(0, n, chunk):
        xb = np.ascontiguousarray(windows[lo:lo + chunk])
        bb = np.repeat(bio[None], len(xb), axis=0)
        yhat, _ = _forward(p64, xb, bb)
        preds[w - 1 + lo:w - 1 + lo + len(xb)] = yhat[:, :, -1]
        if lo == 0:
            preds[: w - 1] = yhat[0, :, : w - 1].T
    return preds


@dataclass
class EvalReport:
    """Aggregated test-set metrics, JSON-serializable."""

    rmse_per_muscle: list
    rmse_mean: float
    pearson_per_muscle: list       # float or None per muscle
    pearson_mean: float | None
    per_motion: dict = field(default_factory=dict)
    n_windows: int = 0
    n_recordings: int = 0
    n_frames: int = 0

    def to_dict(self) -> dict:
        return {
            "rmse_per_muscle": dict(zip(MUSCLE_NAMES, self.rmse_per_muscle)),
            "rmse_mean": self.rmse_mean,
            "pearson_per_muscle": dict(zip(MUSCLE_NAMES, self.pearson_per_muscle)),
            "pearson_mean": self.pearson_mean,
            "per_motion": self.per_motion,
            "n_windows": self.n_windows,
            "n_recordings": self.n_recordings,
            "n_frames": self.n_frames,
        }


def _series_metrics(gt, pred):
    """Per-muscle rmse and pearson over concatenated (T, 8) series."""
    rmses, pearsons = [], []
    for m in range(gt.shape[1]):
        rmses.append(rmse(gt[:, m], pred[:, m]))
        try:
            pearsons.append(pearson(gt[:, m], pred[:, m]))
        except UndefinedCorrelationError:
            pearsons.append(None)
    defined = [p for p in pearsons if p is not None]
    p_mean = float(np.mean(defined)) if defined else None
    return rmses, float(np.mean(rmses)), pearsons, p_mean


def evaluate(params: ModelParams | None, recordings) -> EvalReport:
    """Deterministic metrics of a checkpoint over held-out recordings.

    params=None runs the ground-truth oracle instead of a model; it scores
    the recordings against themselves and is useful to verify the metric
    pipeline end to end (rmse 0, correlation 1).
    """
    recordings = list(recordings)
    if not recordings:
        raise ConfigError("empty test set")
    p64 = params.astype(np.float64) if params is not None else None
    w = params.config.window_len if params is not None else 1

    gts, preds, motions = [], [], []
    for rec in recordings:
        pred = predict_recording(p64, rec)
        gts.append(np.asarray(rec.activation, dtype=np.float64))
        preds.append(pred)
        motions.append(rec.motion_label)

    gt_all = np.concatenate(gts, axis=0)
    pred_all = np.concatenate(preds, axis=0)
    rmses, rmse_mean, pearsons, p_mean = _series_metrics(gt_all, pred_all)

    per_motion = {}
    for motion in sorted(set(motions)):
        g = np.concatenate([g for g, m in zip(gts, motions) if m == motion], axis=0)
        p = np.concatenate([p for p, m in zip(preds, motions) if m == motion], axis=0)
        _, r_mean, _, pm = _series_metrics(g, p)
        per_motion[motion] = {
            "rmse_mean": r_mean,
            "pearson_mean": pm,
            "n_frames": int(len(g)),
        }

    return EvalReport(
        rmse_per_muscle=rmses,
        rmse_mean=rmse_mean,
        pearson_per_muscle=pearsons,
        pearson_mean=p_mean,
        per_motion=per_motion,
        n_windows=int(sum(len(g) - w + 1 for g in gts)),
        n_recordings=len(recordings),
        n_frames=int(len(gt_all)),
    )


def mean_predictor_rmse(train_recordings, test_recordings):
    """Closed-form baseline: predict each muscle's training-set mean.

    Returns (per-muscle rmse over the concatenated test series, their mean).
    """
    train_recordings, test_recordings = list(train_recordings), list(test_recordings)
    if not train_recordings or not test_recordings:
        raise ConfigError("baseline needs non-empty train and test sets")
    mu = np.concatenate(
        [np.asarray(r.activation, dtype=np.float64) for r in train_recordings], axis=0
    ).mean(axis=0)
    y = np.concatenate(
        [np.asarray(r.activation, dtype=np.float64) for r in test_recordings], axis=0
    )
    per_muscle = np.sqrt(np.mean((y - mu) ** 2, axis=0))
    return per_muscle, float(per_muscle.mean())


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def write_prediction_csv(path, t_ms, gt, pred):
    """Frame dump `t_ms,gt0..gt7,pred0..pred7` (pass gt=None for `pred0..` only)."""
    cols = []
    if gt is not None:
        cols += [f"gt{i}" for i in range(gt.shape[1])]
    cols += [f"pred{i}" for i in range(pred.shape[1])]
    with open(path, "w") as f:
        f.write("t_ms," + ",".join(cols) + "\n")
        for i, t in enumerate(t_ms):
            row = [] if gt is None else list(gt[i])
            row += list(pred[i])
            f.write(str(int(t)) + "," + ",".join(f"{v:.6f}" for v in row) + "\n")


def plot_recording_svg(path, t_ms, gt, pred, title=""):
    """Ground truth vs prediction traces, one panel per muscle, as SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t_s = np.asarray(t_ms) / 1000.0
    fig, axes = plt.subplots(4, 2, figsize=(11, 9), sharex=True)
    for m, ax in enumerate(axes.ravel()):
        ax.plot(t_s, gt[:, m], lw=1.0, label="measured")
        ax.plot(t_s, pred[:, m], lw=1.0, label="estimated")
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(MUSCLE_NAMES[m], fontsize=9)
    axes[0, 0].legend(fontsize=8, loc="upper right")
    for ax in axes[-1]:
        ax.set_xlabel("time (s)")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
