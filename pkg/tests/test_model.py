"""Network forward/backward, losses, parameters, checkpoints."""

import numpy as np
import pytest

import solemyo as sm
from solemyo.model import is_weight_matrix, tensor_shapes, flops_per_window
from conftest import rand_window


def _toy_batch(cfg, rng, n=2):
    x = rng.uniform(-1.0, 1.0, size=(n, cfg.n_channels, cfg.window_len))
    y = rng.uniform(0.0, 1.0, size=(n, cfg.n_muscles, cfg.window_len))
    bio = rng.uniform(0.0, 1.0, size=(n, cfg.bio_dim))
    return x, y, bio


# ---------------------------------------------------------------------------
# Configuration and parameter inventory
# ---------------------------------------------------------------------------

def test_default_parameter_count_near_published_size():
    cfg = sm.ModelConfig()
    n = sm.param_count(cfg)
    assert n == 7_911_485
    assert abs(n - 7_900_000) / 7_900_000 < 0.15


def test_inventory_covers_every_component():
    shapes = tensor_shapes(sm.ModelConfig())
    names = list(shapes)
    for prefix in ("mask.", "embed.", "film.", "layers.0.", "layers.1.", "head."):
        assert any(k.startswith(prefix) for k in names)
    assert "pos" in names
    assert shapes["mask.w1"] == (36, 9)
    assert shapes["pos"] == (20, 512)
    assert shapes["head.w2"] == (128, 8)


def test_config_validation_rejects_bad_values():
    with pytest.raises(sm.ConfigError):
        sm.ModelConfig(d_model=10, n_heads=4).validate()  # not divisible
    with pytest.raises(sm.ConfigError):
        sm.ModelConfig(dropout=1.5).validate()
    with pytest.raises(sm.ConfigError):
        sm.ModelConfig(window_len=1).validate()
    with pytest.raises(sm.ConfigError):
        sm.ModelConfig(mask_fusion="concat").validate()


def test_weight_matrix_predicate():
    assert is_weight_matrix("mask.w1")
    assert is_weight_matrix("layers.1.attn.wq")
    assert is_weight_matrix("head.w2")
    assert not is_weight_matrix("mask.b1")
    assert not is_weight_matrix("layers.0.ln1.g")
    assert not is_weight_matrix("pos")


def test_init_is_deterministic_and_seed_sensitive(toy_cfg):
    a = sm.init_params(toy_cfg, seed=3)
    b = sm.init_params(toy_cfg, seed=3)
    c = sm.init_params(toy_cfg, seed=4)
    for k in a.names():
        np.testing.assert_array_equal(a[k], b[k])
    assert any(not np.array_equal(a[k], c[k]) for k in a.names())


def test_flops_grow_with_model_size():
    small = flops_per_window(sm.ModelConfig(d_model=128, ffn_dim=256))
    big = flops_per_window(sm.ModelConfig())
    assert 0 < small < big


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def test_forward_shapes_and_output_range(toy_cfg):
    params = sm.init_params(toy_cfg, seed=0)
    rng = np.random.default_rng(0)
    x, _, bio = _toy_batch(toy_cfg, rng, n=3)
    out = sm.forward(params, x, bio)
    assert out.shape == (3, 8, toy_cfg.window_len)
    assert np.all(out > 0.0) and np.all(out < 1.0)

    single = sm.forward(params, x[0], bio[0])
    assert single.shape == (8, toy_cfg.window_len)
    np.testing.assert_allclose(single, out[0], atol=1e-12)


def test_forward_eval_mode_is_deterministic(toy_cfg):
    params = sm.init_params(toy_cfg, seed=0)
    rng = np.random.default_rng(1)
    x, _, bio = _toy_batch(toy_cfg, rng)
    a = sm.forward(params, x, bio)
    b = sm.forward(params, x, bio)
    np.testing.assert_array_equal(a, b)


def test_dropout_zero_training_equals_eval(toy_cfg):
    params = sm.init_params(toy_cfg, seed=0)
    rng = np.random.default_rng(2)
    x, _, bio = _toy_batch(toy_cfg, rng)
    tr = sm.forward(params, x, bio, training=True, rng=np.random.default_rng(0))
    ev = sm.forward(params, x, bio)
    np.testing.assert_allclose(tr, ev, atol=1e-12)


def test_dropout_active_changes_training_output():
    cfg = sm.ModelConfig(window_len=4, d_model=8, mask_hidden=4, n_layers=1,
                         n_heads=2, ffn_dim=16, dropout=0.5, film_hidden=8,
                         head_hidden=16)
    params = sm.init_params(cfg, seed=0)
    rng = np.random.default_rng(3)
    x, _, bio = _toy_batch(cfg, rng)
    a = sm.forward(params, x, bio, training=True, rng=np.random.default_rng(1))
    b = sm.forward(params, x, bio, training=True, rng=np.random.default_rng(2))
    ev = sm.forward(params, x, bio)
    assert not np.allclose(a, b)
    assert not np.allclose(a, ev)


def test_bio_conditioning_is_identity_at_init(toy_cfg):
    """The conditioning head starts as a no-op so two bios agree at init."""
    params = sm.init_params(toy_cfg, seed=0)
    rng = np.random.default_rng(4)
    x, _, bio = _toy_batch(toy_cfg, rng)
    out1 = sm.forward(params, x, bio)
    out2 = sm.forward(params, x, np.zeros_like(bio))
    np.testing.assert_allclose(out1, out2, atol=1e-12)


def test_channel_mask_bounded_and_disable_flag(toy_cfg):
    params = sm.init_params(toy_cfg, seed=5)
    x = rand_window(np.random.default_rng(5), w=toy_cfg.window_len)
    s = sm.region_importance_mask(params, x)
    assert s.shape == (36,)
    assert np.all(s > 0.0) and np.all(s < 1.0)

    # with the mask disabled the mask weights must have no influence
    off = sm.ModelConfig(**{**toy_cfg.to_dict(), "use_mask": False})
    p_off = sm.init_params(off, seed=5)
    rng = np.random.default_rng(8)
    xb = np.stack([x, rand_window(rng, w=toy_cfg.window_len)])
    bio = np.random.default_rng(9).uniform(0, 1, size=(2, 5))
    before = sm.forward(p_off, xb, bio)
    p_off.tensors["mask.w1"] += 7.0
    after = sm.forward(p_off, xb, bio)
    np.testing.assert_array_equal(before, after)


def test_mask_fusion_variants_differ(toy_cfg):
    cfg_max = sm.ModelConfig(**{**toy_cfg.to_dict(), "mask_fusion": "max"})
    p_sum = sm.init_params(toy_cfg, seed=6)
    p_max = sm.init_params(cfg_max, seed=6)
    x = rand_window(np.random.default_rng(6), w=toy_cfg.window_len)
    s_sum = sm.region_importance_mask(p_sum, x)
    s_max = sm.region_importance_mask(p_max, x)
    assert not np.allclose(s_sum, s_max)


def test_forward_rejects_non_finite_input(toy_cfg):
    params = sm.init_params(toy_cfg, seed=0)
    rng = np.random.default_rng(7)
    x, _, bio = _toy_batch(toy_cfg, rng)
    x[0, 0, 0] = np.nan
    with pytest.raises(sm.NumericError):
        sm.forward(params, x, bio)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def test_mse_loss_hand_example():
    # ([1,0] vs [0,1]): mean of (1, 1) = 1
    yhat = np.array([[1.0, 0.0]])
    y = np.array([[0.0, 1.0]])
    assert sm.loss_mse(yhat, y) == 1.0


def test_smooth_loss_hand_example():
    # deltas of (0,1,0) are (1,-1); target deltas are (0,0): mean of (1,1) = 1
    yhat = np.array([[0.0, 1.0, 0.0]])
    y = np.array([[0.0, 0.0, 0.0]])
    assert sm.loss_smooth(yhat, y) == 1.0
    # perfect delta tracking scores zero even with a constant offset
    assert sm.loss_smooth(yhat + 0.5, yhat) == 0.0


def test_total_loss_composition(toy_cfg):
    rng = np.random.default_rng(8)
    yhat = rng.uniform(0, 1, size=(3, 8, 6))
    y = rng.uniform(0, 1, size=(3, 8, 6))
    total = sm.loss_total(yhat, y, lam=0.1)
    parts = sm.loss_mse(yhat, y) + 0.1 * sm.loss_smooth(yhat, y)
    assert abs(total - parts) < 1e-12


def test_losses_validate_shapes():
    with pytest.raises(sm.ConfigError):
        sm.loss_mse(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(sm.ConfigError):
        sm.loss_smooth(np.zeros((2, 1)), np.zeros((2, 1)))  # needs >= 2 steps
    with pytest.raises(sm.ConfigError):
        sm.loss_total(np.zeros((2, 3)), np.zeros((2, 3)), lam=-0.5)


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def test_gradient_linearity_in_smoothness_weight(toy_cfg):
    params = sm.init_params(toy_cfg, seed=9).astype(np.float64)
    rng = np.random.default_rng(9)
    x, y, bio = _toy_batch(toy_cfg, rng)
    _, g0 = sm.gradients(params, x, bio, y, lam=0.0)
    _, g1 = sm.gradients(params, x, bio, y, lam=1.0)
    _, gl = sm.gradients(params, x, bio, y, lam=0.1)
    for k in g0:
        combined = g0[k] + 0.1 * (g1[k] - g0[k])
        np.testing.assert_allclose(gl[k], combined, atol=1e-10)


def test_gradients_cover_every_tensor(toy_cfg):
    params = sm.init_params(toy_cfg, seed=10)
    rng = np.random.default_rng(10)
    x, y, bio = _toy_batch(toy_cfg, rng)
    loss, grads = sm.gradients(params, x, bio, y)
    assert np.isfinite(loss)
    assert set(grads) == set(params.names())
    for k, g in grads.items():
        assert g.shape == params[k].shape


def test_gradients_reject_non_finite_target(toy_cfg):
    params = sm.init_params(toy_cfg, seed=11)
    rng = np.random.default_rng(11)
    x, y, bio = _toy_batch(toy_cfg, rng)
    y[0, 0, 0] = np.inf
    with pytest.raises(sm.NumericError):
        sm.gradients(params, x, bio, y)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip_bitwise(toy_cfg, tmp_path):
    path = str(tmp_path / "m.ckpt")
    params = sm.init_params(toy_cfg, seed=12)
    sm.save_checkpoint(params, toy_cfg, path, meta={"note": "t"})
    back, cfg = sm.load_checkpoint(path)
    assert cfg.to_dict() == toy_cfg.to_dict()
    assert back.meta["note"] == "t"
    for k in params.names():
        np.testing.assert_array_equal(back[k], params[k])


def test_checkpoint_rejects_mismatched_config(toy_cfg, tmp_path):
    params = sm.init_params(toy_cfg, seed=0)
    other = sm.ModelConfig()
    with pytest.raises(sm.ConfigError):
        sm.save_checkpoint(params, other, str(tmp_path / "m.ckpt"))


def test_checkpoint_corruption_modes(toy_cfg, tmp_path):
    path = str(tmp_path / "m.ckpt")
    params = sm.init_params(toy_cfg, seed=13)
    sm.save_checkpoint(params, toy_cfg, path)
    blob = open(path, "rb").read()
    head_end = blob.index(b"\n") + 1

    # truncated payload
    open(path, "wb").write(blob[:-8])
    with pytest.raises(sm.CheckpointError):
        sm.load_checkpoint(path)
    # flipped payload byte fails the checksum
    bad = bytearray(blob)
    bad[head_end + 5] ^= 0xFF
    open(path, "wb").write(bytes(bad))
    with pytest.raises(sm.CheckpointError):
        sm.load_checkpoint(path)
    # unknown format marker
    open(path, "wb").write(b'{"format": "nope"}\n' + blob[head_end:])
    with pytest.raises(sm.CheckpointError):
        sm.load_checkpoint(path)
    # not json at all
    open(path, "wb").write(b"\x00\x01\x02\n" + blob[head_end:])
    with pytest.raises(sm.CheckpointError):
        sm.load_checkpoint(path)
    # checkpoint errors are data-format errors
    assert issubclass(sm.CheckpointError, sm.DataFormatError)
