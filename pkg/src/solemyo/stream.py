"""Frame-by-frame inference over a sliding window of pressure frames.

A StreamState buffers the last window_len normalized frames; every pushed
frame after the warm-up runs the model on the current window and emits the
newest time step's prediction. The math runs in 64-bit, the same as batch
evaluation, so a replayed recording produces the batch path's numbers.
"""

from __future__ import annotations

import numpy as np

from .data import PRESSURE_MAX_KG, N_CHANNELS, PressureFrame, normalize_bio
from .errors import ConfigError, OutOfRangeError
from .model import ModelParams, _forward


class StreamState:
    """Ring buffer plus checkpoint: feed frames in, get activations out."""

    def __init__(self, params: ModelParams, bio):
        self.params = params.astype(np.float64)
        self.window_len = params.config.window_len
        bio_vec = bio if isinstance(bio, np.ndarray) else normalize_bio(bio)
        if bio_vec.shape != (params.config.bio_dim,):
            raise ConfigError(f"bio vector shape {bio_vec.shape} does not match model")
        self._bio = np.asarray(bio_vec, dtype=np.float64)[None]
        self._buffer = np.zeros((self.window_len, N_CHANNELS))
        self.frames_seen = 0

    def push(self, frame) -> np.ndarray | None:
        """Consume one pressure frame (kg); emit an 8-vector once warmed up.

        Returns None for the first window_len - 1 frames (the warm-up
        second), then the latest frame's estimated activation.
        """
        if isinstance(frame, PressureFrame):
            vec = frame.as_vector()
        else:
            vec = np.asarray(frame, dtype=float)
        if vec.shape != (N_CHANNELS,):
            raise ConfigError(f"expected {N_CHANNELS} channels, got {vec.shape}")
        if vec.min() < 0 or vec.max() > PRESSURE_MAX_KG or not np.isfinite(vec).all():
            raise OutOfRangeError(
                f"pressure frame outside [0, {PRESSURE_MAX_KG}] kg at stream "
                f"frame {self.frames_seen}"
            )
        # same normalization expression as the batch pipeline, bit for bit
        self._buffer = np.roll(self._buffer, -1, axis=0)
        self._buffer[-1] = 2.0 * (vec / PRESSURE_MAX_KG) - 1.0
        self.frames_seen += 1
        if self.frames_seen < self.window_len:
            return None
        x = np.ascontiguousarray(self._buffer.T)[None]    # (1, 36, W)
        yhat, _ = _forward(self.params, x, self._bio)
        return yhat[0, :, -1]


def streaming_infer(state: StreamState, frame) -> np.ndarray | None:
    """Functional wrapper over StreamState.push for one frame."""
    return state.push(frame)


def stream_recording(params: ModelParams, frames, bio):
    """Replay pressure frames through a fresh stream.

    Returns (t_ms, predictions): one row per emitted estimate, starting at
    the window_len-th frame.
    """
    state = StreamState(params, bio)
    t_out, preds = [], []
    for frame in frames:
        out = state.push(frame)
        if out is not None:
            t_out.append(frame.t_ms if isinstance(frame, PressureFrame) else state.frames_seen)
            preds.append(out)
    if not preds:
        return np.empty(0, dtype=np.int64), np.empty((0, 8))
    return np.asarray(t_out, dtype=np.int64), np.stack(preds)
