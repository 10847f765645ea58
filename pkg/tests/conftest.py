"""Shared fixtures: a tiny synthetic dataset and toy model configs.

Heavy end-to-end fixtures (the full ten-user experiment) live in
test_acceptance.py so the unit tests stay fast on their own.
"""

import os

import numpy as np
import pytest

import solemyo as sm


@pytest.fixture(scope="session")
def toy_cfg():
    # smallest config that still exercises every code path
    return sm.ModelConfig(
        window_len=4, d_model=8, mask_hidden=4, n_layers=2, n_heads=2,
        ffn_dim=16, dropout=0.0, film_hidden=8, head_hidden=16,
    )


@pytest.fixture(scope="session")
def small_ds_dir(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("small_ds"))
    sm.gen_dataset(out, n_users=3, seed=7, duration_s=8.0)
    return out


@pytest.fixture(scope="session")
def small_ds(small_ds_dir):
    return sm.load_dataset(os.path.join(small_ds_dir, "manifest.json"))


@pytest.fixture(scope="session")
def small_windows(small_ds):
    return [w for rec in small_ds for w in sm.window(rec, 20, 10)]


@pytest.fixture(scope="session")
def tiny_trained(small_windows):
    """A barely trained small model, good enough for plumbing tests."""
    mcfg = sm.ModelConfig(d_model=32, ffn_dim=64, n_layers=1, n_heads=2,
                          dropout=0.0, head_hidden=16)
    tcfg = sm.TrainConfig(lr=1e-3, batch_size=64, l2_coeff=0.0, epochs=2, seed=0)
    params, trace = sm.fit(small_windows, tcfg, mcfg)
    return params, trace


def rand_window(rng, w=20, lo_kg=0.0, hi_kg=20.0):
    """Random normalized pressure window (36, w) with full-range content."""
    kg = rng.uniform(lo_kg, hi_kg, size=(36, w))
    return (2.0 * (kg / 20.0) - 1.0).astype(np.float32)
