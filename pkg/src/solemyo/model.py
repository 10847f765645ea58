"""The estimation network and its exact analytic gradients.

Pipeline per window: a learned per-channel importance mask gates the 36
pressure channels, a linear embedding lifts each frame to d_model, a
bio-conditioned affine (FiLM) modulates the features, a learned positional
table is added, two pre-normalization transformer encoder layers mix time
steps, and a two-layer head with a sigmoid emits 8 muscle activations per
frame.

Everything is plain numpy. The backward pass is hand-derived and is
checked against central finite differences in the test suite; there is no
autograd anywhere.
"""

from __future__ import annotations

import json
import zlib
from collections import OrderedDict
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .errors import CheckpointError, ConfigError, NumericError

LN_EPS = 1e-5


@dataclass
class ModelConfig:
    """Architecture hyperparameters. Defaults give the full-scale network."""

    n_channels: int = 36
    window_len: int = 20
    d_model: int = 512
    mask_hidden: int = 9
    n_layers: int = 2
    n_heads: int = 4
    ffn_dim: int = 2752
    dropout: float = 0.1
    bio_dim: int = 5
    film_hidden: int = 64
    head_hidden: int = 128
    lambda_smooth: float = 0.1
    n_muscles: int = 8
    mask_fusion: str = "sum"   # how the two pooled-branch outputs combine
    use_mask: bool = True      # ablation: channel importance mask
    use_film: bool = True      # ablation: bio conditioning

    def validate(self):
        for f in dc_fields(self):
            if f.type == "int" and getattr(self, f.name) < 1:
                raise ConfigError(f"{f.name} must be >= 1, got {getattr(self, f.name)}")
        if self.d_model % self.n_heads:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.window_len < 2:
            raise ConfigError(
                f"window_len must be >= 2 for the delta objective, got {self.window_len}"
            )
        if self.lambda_smooth < 0:
            raise ConfigError(f"lambda_smooth must be >= 0, got {self.lambda_smooth}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.mask_fusion not in ("sum", "max"):
            raise ConfigError(f"unknown mask_fusion {self.mask_fusion!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dc_fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def tensor_shapes(cfg: ModelConfig) -> "OrderedDict[str, tuple]":
    """Canonical tensor inventory: name -> shape, in checkpoint order."""
    c, w, d = cfg.n_channels, cfg.window_len, cfg.d_model
    shapes = OrderedDict()
    shapes["mask.w1"] = (c, cfg.mask_hidden)
    shapes["mask.b1"] = (cfg.mask_hidden,)
    shapes["mask.w2"] = (cfg.mask_hidden, c)
    shapes["mask.b2"] = (c,)
    shapes["embed.w"] = (c, d)
    shapes["embed.b"] = (d,)
    shapes["film.w1"] = (cfg.bio_dim, cfg.film_hidden)
    shapes["film.b1"] = (cfg.film_hidden,)
    shapes["film.w2"] = (cfg.film_hidden, 2 * d)
    shapes["film.b2"] = (2 * d,)
    shapes["pos"] = (w, d)
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        shapes[p + "ln1.g"] = (d,)
        shapes[p + "ln1.b"] = (d,)
        for proj in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"):
            shapes[p + "attn." + proj] = (d, d) if proj.startswith("w") else (d,)
        shapes[p + "ln2.g"] = (d,)
        shapes[p + "ln2.b"] = (d,)
        shapes[p + "ffn.w1"] = (d, cfg.ffn_dim)
        shapes[p + "ffn.b1"] = (cfg.ffn_dim,)
        shapes[p + "ffn.w2"] = (cfg.ffn_dim, d)
        shapes[p + "ffn.b2"] = (d,)
    shapes["head.w1"] = (d, cfg.head_hidden)
    shapes["head.b1"] = (cfg.head_hidden,)
    shapes["head.w2"] = (cfg.head_hidden, cfg.n_muscles)
    shapes["head.b2"] = (cfg.n_muscles,)
    return shapes


def is_weight_matrix(name: str) -> bool:
    """True for tensors that get the L2 penalty (weight matrices only)."""
    return name.rsplit(".", 1)[-1].startswith("w")


class ModelParams:
    """All learnable tensors, keyed by dotted names in checkpoint order."""

    def __init__(self, config: ModelConfig, tensors: "OrderedDict[str, np.ndarray]",
                 seed: int | None = None):
        self.config = config
        self.tensors = tensors
        self.seed = seed
        self.meta: dict = {}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray):
        if name not in self.tensors:
            raise KeyError(name)
        self.tensors[name] = value

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def items(self):
        return self.tensors.items()

    def param_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def astype(self, dtype) -> "ModelParams":
        out = ModelParams(
            self.config,
            OrderedDict((k, np.asarray(v, dtype=dtype).copy()) for k, v in self.items()),
            seed=self.seed,
        )
        out.meta = dict(self.meta)
        return out

    def copy(self) -> "ModelParams":
        return self.astype(next(iter(self.tensors.values())).dtype)

    def check_finite(self):
        for name, t in self.items():
            if not np.isfinite(t).all():
                raise NumericError(f"non-finite values in parameter tensor {name!r}")


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Seeded initialization.

    Linear weights draw uniform +-1/sqrt(fan_in), biases start at zero,
    normalization gains at one, the positional table at normal(0, 0.02).
    The bio-conditioning output layer starts at zero so conditioning is the
    identity at step 0. Random tensors are drawn in canonical inventory
    order, which pins the mapping from seed to weights.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    tensors = OrderedDict()
    for name, shape in tensor_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "pos":
            t = rng.normal(0.0, 0.02, size=shape)
        elif name in ("film.w2", "film.b2"):
            t = np.zeros(shape)
        elif leaf == "g":
            t = np.ones(shape)
        elif leaf.startswith("b"):
            t = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            t = rng.uniform(-bound, bound, size=shape)
        tensors[name] = t.astype(dtype)
    return ModelParams(cfg, tensors, seed=seed)


def param_count(obj) -> int:
    """Parameter count of a ModelParams or (by inventory) a ModelConfig."""
    if isinstance(obj, ModelParams):
        return obj.param_count()
    return int(sum(np.prod(s) for s in tensor_shapes(obj).values()))


def flops_per_window(cfg: ModelConfig) -> int:
    """Analytic forward-pass FLOP estimate for one window (2 per multiply-add)."""
    c, w, d = cfg.n_channels, cfg.window_len, cfg.d_model
    f, m = cfg.ffn_dim, cfg.n_muscles
    total = 0
    total += 2 * c * w + 8 * c * cfg.mask_hidden + 4 * c + c * w        # mask
    total += 2 * w * c * d                                             # embed
    total += 2 * cfg.bio_dim * cfg.film_hidden \
        + 2 * cfg.film_hidden * 2 * d + 3 * w * d                      # film
    total += w * d                                                     # pos add
    per_layer = (
        16 * w * d          # two layer norms
        + 8 * w * d * d     # q, k, v, out projections
        + 4 * w * w * d     # scores and context
        + 4 * cfg.n_heads * w * w   # softmax
        + 4 * w * d * f + w * f     # feed-forward
        + 2 * w * d         # residual adds
    )
    total += cfg.n_layers * per_layer
    total += 2 * w * d * cfg.head_hidden + 2 * w * cfg.head_hidden * m + 4 * w * m
    return int(total)


# ---------------------------------------------------------------------------
# Numeric primitives
# ---------------------------------------------------------------------------

def _sigmoid(z):
    # tanh form: stable for large |z| without branching
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax_last(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xh = (x - mu) * inv
    return g * xh + b, xh, inv


def _layer_norm_backward(dy, g, xh, inv):
    red = tuple(range(dy.ndim - 1))
    dg = (dy * xh).sum(axis=red)
    db = dy.sum(axis=red)
    dxh = dy * g
    dx = inv * (
        dxh
        - dxh.mean(axis=-1, keepdims=True)
        - xh * (dxh * xh).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(t, n_heads):
    b, w, d = t.shape
    return t.reshape(b, w, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(t):
    b, h, w, dh = t.shape
    return t.transpose(0, 2, 1, 3).reshape(b, w, h * dh)


def _w_grad(inp, dout):
    """d(loss)/dW for out = inp @ W, summing all leading axes."""
    return inp.reshape(-1, inp.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])


def _drop_mask(rng, shape, p, dtype):
    # inverted dropout: scaling at train time keeps eval untouched
    return (rng.random(shape) >= p).astype(dtype) / (1.0 - p)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

def _check_shapes(cfg: ModelConfig, x, bio):
    if x.shape[-2:] != (cfg.n_channels, cfg.window_len):
        raise ConfigError(
            f"pressure window shape {x.shape} does not match "
            f"({cfg.n_channels}, {cfg.window_len})"
        )
    if bio.shape[-1] != cfg.bio_dim:
        raise ConfigError(f"bio vector length {bio.shape[-1]} != {cfg.bio_dim}")


def _forward(params: ModelParams, x, bio, training=False, rng=None, want_cache=False):
    """Batched forward; x (B, C, W), bio (B, bio_dim) in the params' dtype."""
    cfg = params.config
    t = params.tensors
    d = cfg.d_model
    drop_p = cfg.dropout if (training and rng is not None and cfg.dropout > 0) else 0.0
    cache = {"drop_p": drop_p} if want_cache else None

    if cfg.use_mask:
        za = x.mean(axis=2)
        zm = x.max(axis=2)
        ha = np.maximum(za @ t["mask.w1"] + t["mask.b1"], 0)
        hm = np.maximum(zm @ t["mask.w1"] + t["mask.b1"], 0)
        ga = ha @ t["mask.w2"] + t["mask.b2"]
        gm = hm @ t["mask.w2"] + t["mask.b2"]
        pre = ga + gm if cfg.mask_fusion == "sum" else np.maximum(ga, gm)
        s = _sigmoid(pre)
        xp = x * s[:, :, None]
        if want_cache:
            cache.update(x=x, za=za, zm=zm, ha=ha, hm=hm, ga=ga, gm=gm, s=s, xp=xp)
    else:
        s, xp = None, x
        if want_cache:
            cache.update(x=x, xp=xp)

    e = xp.transpose(0, 2, 1) @ t["embed.w"] + t["embed.b"]   # (B, W, D)

    if cfg.use_film:
        f1 = np.maximum(bio @ t["film.w1"] + t["film.b1"], 0)
        fo = f1 @ t["film.w2"] + t["film.b2"]
        dgam, beta = fo[:, :d], fo[:, d:]
        xf = (1.0 + dgam)[:, None, :] * e + beta[:, None, :]
        if want_cache:
            cache.update(bio=bio, f1=f1, dgam=dgam, e=e)
    else:
        xf = e
        if want_cache:
            cache.update(e=e)

    h = xf + t["pos"]
    if drop_p > 0:
        m0 = _drop_mask(rng, h.shape, drop_p, h.dtype)
        h = h * m0
        if want_cache:
            cache["m0"] = m0

    scale = 1.0 / np.sqrt(d // cfg.n_heads)
    layer_caches = []
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        lc = {"h_in": h} if want_cache else None

        hn, xh1, inv1 = _layer_norm(h, t[p + "ln1.g"], t[p + "ln1.b"])
        q = hn @ t[p + "attn.wq"] + t[p + "attn.bq"]
        k = hn @ t[p + "attn.wk"] + t[p + "attn.bk"]
        v = hn @ t[p + "attn.wv"] + t[p + "attn.bv"]
        qh = _split_heads(q, cfg.n_heads)
        kh = _split_heads(k, cfg.n_heads)
        vh = _split_heads(v, cfg.n_heads)
        attn = _softmax_last(qh @ kh.transpose(0, 1, 3, 2) * scale)
        ctxm = _merge_heads(attn @ vh)
        ao = ctxm @ t[p + "attn.wo"] + t[p + "attn.bo"]
        if drop_p > 0:
            ma = _drop_mask(rng, ao.shape, drop_p, ao.dtype)
            ao = ao * ma
            if want_cache:
                lc["ma"] = ma
        h = h + ao

        hn2, xh2, inv2 = _layer_norm(h, t[p + "ln2.g"], t[p + "ln2.b"])
        f = np.maximum(hn2 @ t[p + "ffn.w1"] + t[p + "ffn.b1"], 0)
        o = f @ t[p + "ffn.w2"] + t[p + "ffn.b2"]
        if drop_p > 0:
            mf = _drop_mask(rng, o.shape, drop_p, o.dtype)
            o = o * mf
            if want_cache:
                lc["mf"] = mf
        if want_cache:
            lc.update(hn=hn, xh1=xh1, inv1=inv1, qh=qh, kh=kh, vh=vh,
                      attn=attn, ctxm=ctxm, h_mid=h, hn2=hn2, xh2=xh2,
                      inv2=inv2, f=f)
            layer_caches.append(lc)
        h = h + o

    hh = np.maximum(h @ t["head.w1"] + t["head.b1"], 0)
    logits = hh @ t["head.w2"] + t["head.b2"]
    yhat = _sigmoid(logits)
    if want_cache:
        cache.update(layers=layer_caches, h_final=h, hh=hh, yhat=yhat)
    return yhat.transpose(0, 2, 1), cache


def region_importance_mask(params: ModelParams, x) -> np.ndarray:
    """Per-channel gains s in (0,1) from pooled temporal statistics.

    The average-pool and max-pool summaries each pass through the same
    two-layer MLP; the fused result is squashed by a sigmoid. Accepts one
    window (C, W) or a batch (B, C, W).
    """
    cfg = params.config
    x = np.asarray(x)
    if not np.isfinite(x).all():
        raise NumericError("non-finite values in mask input")
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.shape[-2] != cfg.n_channels:
        raise ConfigError(f"expected {cfg.n_channels} channels, got {xb.shape[-2]}")
    t = params.tensors
    za = xb.mean(axis=2)
    zm = xb.max(axis=2)
    ha = np.maximum(za @ t["mask.w1"] + t["mask.b1"], 0)
    hm = np.maximum(zm @ t["mask.w1"] + t["mask.b1"], 0)
    ga = ha @ t["mask.w2"] + t["mask.b2"]
    gm = hm @ t["mask.w2"] + t["mask.b2"]
    pre = ga + gm if cfg.mask_fusion == "sum" else np.maximum(ga, gm)
    s = _sigmoid(pre)
    return s[0] if single else s


def forward(params: ModelParams, x, bio_norm, training: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Predict activations for one window (C, W) or a batch (B, C, W).

    Evaluation mode (the default) is deterministic; pass training=True with
    a seeded rng to enable dropout.
    """
    dtype = next(iter(params.tensors.values())).dtype
    x = np.asarray(x, dtype=dtype)
    bio = np.asarray(bio_norm, dtype=dtype)
    single = x.ndim == 2
    if single:
        x, bio = x[None], bio[None]
    _check_shapes(params.config, x, bio)
    if not np.isfinite(x).all():
        raise NumericError("forward input pressure window contains a non-finite value")
    if not np.isfinite(bio).all():
        raise NumericError("forward bio vector contains a non-finite value")
    yhat, _ = _forward(params, x, bio, training=training, rng=rng)
    return yhat[0] if single else yhat


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def loss_mse(y_hat, y) -> float:
    """Mean squared error over every time step and muscle channel."""
    y_hat, y = np.asarray(y_hat), np.asarray(y)
    if y_hat.shape != y.shape:
        raise ConfigError(f"shape mismatch {y_hat.shape} vs {y.shape}")
    d = y_hat.astype(np.float64) - y.astype(np.float64)
    return float(np.mean(d * d))


def loss_smooth(y_hat, y) -> float:
    """Mean squared mismatch of consecutive-frame deltas (time on last axis)."""
    y_hat, y = np.asarray(y_hat), np.asarray(y)
    if y_hat.shape != y.shape:
        raise ConfigError(f"shape mismatch {y_hat.shape} vs {y.shape}")
    if y_hat.shape[-1] < 2:
        raise ConfigError("smoothness loss needs at least 2 time steps")
    dh = np.diff(y_hat.astype(np.float64), axis=-1)
    dy = np.diff(y.astype(np.float64), axis=-1)
    d = dh - dy
    return float(np.mean(d * d))


def loss_total(y_hat, y, lam: float = 0.1) -> float:
    """loss_mse + lam * loss_smooth."""
    if lam < 0:
        raise ConfigError(f"smoothness weight must be >= 0, got {lam}")
    mse = loss_mse(y_hat, y)
    if lam == 0:
        return mse
    return mse + lam * loss_smooth(y_hat, y)


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

def gradients(params: ModelParams, x, bio, y, lam: float | None = None,
              training: bool = False, rng: np.random.Generator | None = None):
    """Loss and its exact analytic gradient for a batch.

    x (B, C, W), bio (B, bio_dim), y (B, M, W); single windows may omit the
    batch axis. Returns (loss, grads) where grads maps every parameter
    tensor name to an array of matching shape. The loss is the batch mean
    of loss_total, so gradients of any zero-weighted or disabled path are
    exactly zero.
    """
    cfg = params.config
    if lam is None:
        lam = cfg.lambda_smooth
    if lam < 0:
        raise ConfigError(f"smoothness weight must be >= 0, got {lam}")
    dtype = next(iter(params.tensors.values())).dtype
    x = np.asarray(x, dtype=dtype)
    bio = np.asarray(bio, dtype=dtype)
    y = np.asarray(y, dtype=dtype)
    if x.ndim == 2:
        x, bio, y = x[None], bio[None], y[None]
    _check_shapes(cfg, x, bio)
    if y.shape != (x.shape[0], cfg.n_muscles, cfg.window_len):
        raise ConfigError(f"target shape {y.shape} does not match model output")

    yhat, cache = _forward(params, x, bio, training=training, rng=rng, want_cache=True)
    loss = loss_total(yhat, y, lam)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite training loss {loss}")

    t = params.tensors
    d = cfg.d_model
    grads = {name: None for name in t}

    # loss -> yhat (B, M, W)
    dyhat = (2.0 / yhat.size) * (yhat - y)
    if lam > 0 and cfg.window_len >= 2:
        dd = np.diff(yhat, axis=-1) - np.diff(y, axis=-1)
        g = (2.0 * lam / dd.size) * dd
        dyhat[..., 1:] += g
        dyhat[..., :-1] -= g

    # sigmoid head
    yh_bwm = cache["yhat"]  # (B, W, M) pre-transpose view of the output
    dlogits = dyhat.transpose(0, 2, 1) * yh_bwm * (1.0 - yh_bwm)

    hh, h_final = cache["hh"], cache["h_final"]
    grads["head.w2"] = _w_grad(hh, dlogits)
    grads["head.b2"] = dlogits.sum(axis=(0, 1))
    dhh = (dlogits @ t["head.w2"].T) * (hh > 0)
    grads["head.w1"] = _w_grad(h_final, dhh)
    grads["head.b1"] = dhh.sum(axis=(0, 1))
    dh = dhh @ t["head.w1"].T

    scale = 1.0 / np.sqrt(d // cfg.n_heads)
    for i in reversed(range(cfg.n_layers)):
        p = f"layers.{i}."
        lc = cache["layers"][i]

        # feed-forward sublayer (residual: h_out = h_mid + dropout(o))
        do = dh * lc["mf"] if "mf" in lc else dh
        f, hn2 = lc["f"], lc["hn2"]
        grads[p + "ffn.w2"] = _w_grad(f, do)
        grads[p + "ffn.b2"] = do.sum(axis=(0, 1))
        df = (do @ t[p + "ffn.w2"].T) * (f > 0)
        grads[p + "ffn.w1"] = _w_grad(hn2, df)
        grads[p + "ffn.b1"] = df.sum(axis=(0, 1))
        dhn2 = df @ t[p + "ffn.w1"].T
        dx_ln2, dg2, db2 = _layer_norm_backward(dhn2, t[p + "ln2.g"], lc["xh2"], lc["inv2"])
        grads[p + "ln2.g"], grads[p + "ln2.b"] = dg2, db2
        dh = dh + dx_ln2

        # attention sublayer (residual: h_mid = h_in + dropout(ao))
        dao = dh * lc["ma"] if "ma" in lc else dh
        ctxm, hn = lc["ctxm"], lc["hn"]
        grads[p + "attn.wo"] = _w_grad(ctxm, dao)
        grads[p + "attn.bo"] = dao.sum(axis=(0, 1))
        dctx = _split_heads(dao @ t[p + "attn.wo"].T, cfg.n_heads)
        attn, qh, kh, vh = lc["attn"], lc["qh"], lc["kh"], lc["vh"]
        dattn = dctx @ vh.transpose(0, 1, 3, 2)
        dvh = attn.transpose(0, 1, 3, 2) @ dctx
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dscores *= scale
        dqh = dscores @ kh
        dkh = dscores.transpose(0, 1, 3, 2) @ qh
        dq, dk, dv = _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)
        grads[p + "attn.wq"] = _w_grad(hn, dq)
        grads[p + "attn.bq"] = dq.sum(axis=(0, 1))
        grads[p + "attn.wk"] = _w_grad(hn, dk)
        grads[p + "attn.bk"] = dk.sum(axis=(0, 1))
        grads[p + "attn.wv"] = _w_grad(hn, dv)
        grads[p + "attn.bv"] = dv.sum(axis=(0, 1))
        dhn = dq @ t[p + "attn.wq"].T + dk @ t[p + "attn.wk"].T + dv @ t[p + "attn.wv"].T
        dx_ln1, dg1, db1 = _layer_norm_backward(dhn, t[p + "ln1.g"], lc["xh1"], lc["inv1"])
        grads[p + "ln1.g"], grads[p + "ln1.b"] = dg1, db1
        dh = dh + dx_ln1

    if "m0" in cache:
        dh = dh * cache["m0"]
    grads["pos"] = dh.sum(axis=0)
    dxf = dh

    e = cache["e"]
    if cfg.use_film:
        f1, dgam, bio_c = cache["f1"], cache["dgam"], cache["bio"]
        ddgam = (dxf * e).sum(axis=1)
        dbeta = dxf.sum(axis=1)
        de = dxf * (1.0 + dgam)[:, None, :]
        dfo = np.concatenate([ddgam, dbeta], axis=1)
        grads["film.w2"] = f1.T @ dfo
        grads["film.b2"] = dfo.sum(axis=0)
        df1 = (dfo @ t["film.w2"].T) * (f1 > 0)
        grads["film.w1"] = bio_c.T @ df1
        grads["film.b1"] = df1.sum(axis=0)
    else:
        de = dxf
        for name in ("film.w1", "film.b1", "film.w2", "film.b2"):
            grads[name] = np.zeros_like(t[name])

    xp = cache["xp"]
    grads["embed.w"] = _w_grad(xp.transpose(0, 2, 1), de)
    grads["embed.b"] = de.sum(axis=(0, 1))
    dxp = (de @ t["embed.w"].T).transpose(0, 2, 1)   # (B, C, W)

    if cfg.use_mask:
        s, ha, hm, za, zm = cache["s"], cache["ha"], cache["hm"], cache["za"], cache["zm"]
        ds = (dxp * cache["x"]).sum(axis=2)
        dpre = ds * s * (1.0 - s)
        if cfg.mask_fusion == "sum":
            dga, dgm = dpre, dpre
        else:
            tie = cache["ga"] >= cache["gm"]
            dga, dgm = dpre * tie, dpre * ~tie
        grads["mask.w2"] = ha.T @ dga + hm.T @ dgm
        grads["mask.b2"] = dga.sum(axis=0) + dgm.sum(axis=0)
        dha = (dga @ t["mask.w2"].T) * (ha > 0)
        dhm = (dgm @ t["mask.w2"].T) * (hm > 0)
        grads["mask.w1"] = za.T @ dha + zm.T @ dhm
        grads["mask.b1"] = dha.sum(axis=0) + dhm.sum(axis=0)
    else:
        for name in ("mask.w1", "mask.b1", "mask.w2", "mask.b2"):
            grads[name] = np.zeros_like(t[name])

    for name, g in grads.items():
        g = np.asarray(g, dtype=dtype)
        if g.shape != t[name].shape:
            raise NumericError(f"gradient shape mismatch for {name!r}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in tensor {name!r}")
        grads[name] = g
    return loss, grads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "solemyo-ckpt-v1"


def save_checkpoint(params: ModelParams, cfg: ModelConfig, path, meta: dict | None = None):
    """Write params as a one-line JSON header plus little-endian float32 data.

    The header records the config, the init seed, the tensor inventory with
    shapes (payload order), the total parameter count, and a CRC-32 of the
    payload. Tensors are stored as 32-bit floats, the training precision.
    """
    if cfg is None:
        cfg = params.config
    elif cfg.to_dict() != params.config.to_dict():
        raise ConfigError("checkpoint config does not match the parameters' config")
    names = params.names()
    payload = b"".join(
        np.ascontiguousarray(params.tensors[n], dtype="<f4").tobytes() for n in names
    )
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": cfg.to_dict(),
        "seed": params.seed,
        "param_count": params.param_count(),
        "crc32": zlib.crc32(payload) & 0xFFFFFFFF,
        "tensors": [{"name": n, "shape": list(params.tensors[n].shape)} for n in names],
        "meta": meta if meta is not None else params.meta,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(payload)


def load_checkpoint(path):
    """Read a checkpoint back as (params, cfg).

    Every corruption mode (bad header, inventory/config mismatch, truncated
    or padded payload, checksum failure) raises CheckpointError.
    """
    with open(path, "rb") as f:
        line = f.readline()
        payload = f.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"checkpoint {path!r}: unreadable header") from exc
    if not isinstance(header, dict) or header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"checkpoint {path!r}: unknown format")
    try:
        cfg = ModelConfig.from_dict(header["config"])
        entries = [(str(e["name"]), tuple(int(v) for v in e["shape"]))
                   for e in header["tensors"]]
        crc = int(header["crc32"])
        declared_count = int(header["param_count"])
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise CheckpointError(f"checkpoint {path!r}: bad header fields: {exc}") from exc

    expected = tensor_shapes(cfg)
    if [n for n, _ in entries] != list(expected.keys()) or any(
        shape != expected[name] for name, shape in entries
    ):
        raise CheckpointError(f"checkpoint {path!r}: tensor inventory does not match config")
    n_total = sum(int(np.prod(s)) for _, s in entries)
    if n_total != declared_count:
        raise CheckpointError(f"checkpoint {path!r}: param_count mismatch")
    if len(payload) != 4 * n_total:
        raise CheckpointError(
            f"checkpoint {path!r}: payload is {len(payload)} bytes, "
            f"expected {4 * n_total}"
        )
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CheckpointError(f"checkpoint {path!r}: checksum mismatch")

    flat = np.frombuffer(payload, dtype="<f4")
    tensors = OrderedDict()
    offset = 0
    for name, shape in entries:
        n = int(np.prod(shape))
        tensors[name] = flat[offset:offset + n].reshape(shape).astype(np.float32)
        offset += n
    params = ModelParams(cfg, tensors, seed=header.get("seed"))
    params.meta = header.get("meta", {})
    return params, cfg
