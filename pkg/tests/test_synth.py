"""Physics oracles for the synthetic generator chain."""

import filecmp
import os

import numpy as np
import pytest

import solemyo as sm
from solemyo.synth import GRAVITY, PRESSURE_FS


def _bio(weight=60.0, height=170.0):
    return sm.BioProfile(weight, height, 30, 42.0, 1)


def _frames_to_kg(frames):
    return np.stack([f.as_vector() for f in frames])


# ---------------------------------------------------------------------------
# Body kinematics
# ---------------------------------------------------------------------------

def test_two_effector_center_of_mass():
    # equal masses at x = 0 and x = 2 average to x = 1
    body = sm.BodyModel(
        total_mass=2.0, com_height=1.0,
        masses=np.array([1.0, 1.0]),
        rest_pos=np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
        gains=np.zeros(2), directions=np.zeros((2, 3)),
    )
    com, acc = sm.com_from_activation(np.zeros((2, 5)), body)
    np.testing.assert_array_equal(com, np.tile([1.0, 0.0, 0.0], (5, 1)))
    np.testing.assert_array_equal(acc, 0.0)


def test_constant_activation_has_zero_acceleration():
    body = sm.BodyModel.from_bio(_bio())
    a = np.full((8, 50), 0.37)
    com, acc = sm.com_from_activation(a, body)
    np.testing.assert_array_equal(acc, 0.0)
    # static limit: the CoP is exactly the CoM ground projection
    cop = sm.cop_from_com(com, acc, body)
    np.testing.assert_array_equal(cop, com[:, :2])


def test_sinusoid_acceleration_matches_closed_form():
    # one driven channel makes the CoM a sinusoid; the rendered CoP must
    # follow the pendulum closed form amp * (1 + h * w^2 / g) * sin(w t)
    body = sm.BodyModel.from_bio(_bio())
    freq = 1.0
    spec = sm.MotionSpec(
        name="probe", amp=np.array([0, 0, 0, 0, 0.6, 0, 0, 0]),
        freq=np.full(8, freq), phase=np.zeros(8),
        duration_s=6.0, noise_sigma=0.0,
    )
    a = sm.gen_activation(spec)
    com, acc = sm.com_from_activation(a, body)
    cop = sm.cop_from_com(com, acc, body)

    w_x = body.masses[4] * body.gains[4] / body.total_mass * body.directions[4, 0]
    omega = 2 * np.pi * freq
    t = np.arange(a.shape[1]) / PRESSURE_FS
    gain = 1.0 + body.com_height * omega**2 / GRAVITY
    pred = 0.3 * w_x + 0.3 * w_x * gain * np.sin(omega * t)
    amp = abs(0.3 * w_x) * gain
    # interior frames only: the end frames reuse one-sided differences
    err = np.max(np.abs(cop[1:-1, 0] - pred[1:-1]))
    assert err <= 0.01 * amp


def test_doubling_mass_leaves_cop_unchanged():
    spec = sm.default_motions(4.0)[0]
    a = sm.gen_activation(spec)
    layout = sm.SensorLayout.default()
    body1 = sm.BodyModel.from_bio(_bio(weight=60.0))
    body2 = sm.BodyModel.from_bio(_bio(weight=120.0))
    cops = []
    loads = []
    for body in (body1, body2):
        com, acc = sm.com_from_activation(a, body)
        cop = sm.cop_from_com(com, acc, body)
        cops.append(cop)
        loads.append(_frames_to_kg(sm.pressure_from_cop(cop, body, layout, rng=None)))
    # mass cancels out of the CoP equation entirely
    np.testing.assert_array_equal(cops[0], cops[1])
    # but the rendered load scales with it, channel by channel
    np.testing.assert_allclose(loads[1], 2.0 * loads[0], atol=1e-12)


# ---------------------------------------------------------------------------
# Pressure rendering
# ---------------------------------------------------------------------------

def test_total_load_is_conserved_before_noise():
    body = sm.BodyModel.from_bio(_bio(weight=71.3))
    spec = sm.default_motions(4.0)[3]
    a = sm.gen_activation(spec)
    com, acc = sm.com_from_activation(a, body)
    cop = sm.cop_from_com(com, acc, body)
    kg = _frames_to_kg(sm.pressure_from_cop(cop, body, sm.SensorLayout.default(), rng=None))
    np.testing.assert_allclose(kg.sum(axis=1), body.total_mass, atol=1e-9)


def test_far_lateral_cop_unloads_the_other_foot():
    body = sm.BodyModel.from_bio(_bio())
    layout = sm.SensorLayout.default()
    # cop_y = -0.1 puts the full weight on the left foot
    cop = np.tile([0.0, -0.1], (5, 1))
    kg = _frames_to_kg(sm.pressure_from_cop(cop, body, layout, rng=None))
    np.testing.assert_array_equal(kg[:, 18:], 0.0)
    np.testing.assert_allclose(kg[:, :18].sum(axis=1), body.total_mass, atol=1e-9)


def test_centered_cop_splits_load_evenly():
    body = sm.BodyModel.from_bio(_bio())
    kg = _frames_to_kg(sm.pressure_from_cop(
        np.zeros((3, 2)), body, sm.SensorLayout.default(), rng=None))
    np.testing.assert_allclose(kg[:, :18].sum(axis=1), body.total_mass / 2, atol=1e-9)
    np.testing.assert_allclose(kg[:, 18:].sum(axis=1), body.total_mass / 2, atol=1e-9)


def test_pressure_noise_is_seeded_and_clamped():
    body = sm.BodyModel.from_bio(_bio())
    layout = sm.SensorLayout.default()
    cop = np.zeros((40, 2))
    a = _frames_to_kg(sm.pressure_from_cop(cop, body, layout,
                                           rng=np.random.default_rng(5)))
    b = _frames_to_kg(sm.pressure_from_cop(cop, body, layout,
                                           rng=np.random.default_rng(5)))
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 20.0
    c = _frames_to_kg(sm.pressure_from_cop(cop, body, layout,
                                           rng=np.random.default_rng(6)))
    assert not np.array_equal(a, c)


def test_distinct_activations_make_distinct_pressure():
    # the chain keeps enough information for the inverse task to be posed:
    # changing one muscle's drive visibly changes the rendered trace
    body = sm.BodyModel.from_bio(_bio())
    layout = sm.SensorLayout.default()
    base = sm.default_motions(4.0)[0]
    bumped = sm.MotionSpec(name="probe", amp=base.amp + np.eye(8)[4] * 0.15,
                           freq=base.freq, phase=base.phase,
                           duration_s=4.0, noise_sigma=0.0)
    quiet = sm.MotionSpec(name="base", amp=base.amp, freq=base.freq,
                          phase=base.phase, duration_s=4.0, noise_sigma=0.0)
    kgs = []
    for spec in (quiet, bumped):
        a = sm.gen_activation(spec)
        com, acc = sm.com_from_activation(a, body)
        cop = sm.cop_from_com(com, acc, body)
        kgs.append(_frames_to_kg(sm.pressure_from_cop(cop, body, layout, rng=None)))
    assert np.max(np.abs(kgs[1] - kgs[0])) > 1e-3


def test_hull_flags():
    layout = sm.SensorLayout.default()
    inside = np.array([[0.0, 0.0], [0.12, 0.13], [-0.12, -0.13]])
    outside = np.array([[0.2, 0.0], [0.0, 0.15], [-0.2, -0.2]])
    assert sm.cop_in_hull(inside, layout).all()
    assert not sm.cop_in_hull(outside, layout).any()


# ---------------------------------------------------------------------------
# Activation programs
# ---------------------------------------------------------------------------

def test_zero_asymmetry_silences_right_side_exactly():
    spec = sm.MotionSpec(name="x", amp=np.full(8, 0.5), freq=np.full(8, 0.5),
                         phase=np.zeros(8), duration_s=4.0, asymmetry=0.0)
    a = sm.gen_activation(spec, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(a[1::2], 0.0)
    assert a[0::2].max() > 0.1


def test_activation_range_and_determinism():
    spec = sm.default_motions(4.0)[5]
    a = sm.gen_activation(spec, rng=np.random.default_rng(2))
    b = sm.gen_activation(spec, rng=np.random.default_rng(2))
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
    assert a.shape == (8, int(4.0 * PRESSURE_FS))


def test_motion_spec_validation_and_roundtrip():
    good = sm.default_motions(4.0)[0]
    assert sm.MotionSpec.from_dict(good.to_dict()).to_dict() == good.to_dict()
    for kw in (dict(amp=np.full(8, 1.2)), dict(duration_s=0.5),
               dict(freq=np.full(8, 6.0)), dict(asymmetry=-0.1)):
        bad = sm.MotionSpec(name="bad", amp=good.amp, freq=good.freq,
                            phase=good.phase, duration_s=4.0)
        for k, v in kw.items():
            setattr(bad, k, v)
        with pytest.raises(sm.ConfigError):
            bad.validate()


def test_body_and_layout_validation(tmp_path):
    body = sm.BodyModel.from_bio(_bio())
    body.masses = body.masses * 1.01
    with pytest.raises(sm.ConfigError):
        body.validate()
    layout = sm.SensorLayout.default()
    layout.validate()
    layout.to_json(tmp_path / "layout.json")
    again = sm.SensorLayout.from_json(tmp_path / "layout.json")
    np.testing.assert_array_equal(again.coords, layout.coords)
    with pytest.raises(sm.ConfigError):
        sm.SensorLayout(coords=layout.coords, sigma=0.0).validate()
    (tmp_path / "bad.json").write_text('{"coords": "nope"}')
    with pytest.raises(sm.DataFormatError):
        sm.SensorLayout.from_json(tmp_path / "bad.json")


# ---------------------------------------------------------------------------
# Recordings and datasets
# ---------------------------------------------------------------------------

def test_gen_recording_emg_hits_activation_at_shared_timestamps():
    spec = sm.default_motions(4.0)[1]
    rec = sm.gen_recording(_bio(), spec, sm.SensorLayout.default(), seed=3)
    t_ms, uv = rec["emg"]
    assert t_ms[0] == 0 and np.all(np.diff(t_ms) == 2)
    # at the 50 ms knots the interpolated stream equals activation * 1000
    knots = np.arange(rec["activation"].shape[1]) * sm.FRAME_MS
    idx = np.searchsorted(t_ms, knots)
    np.testing.assert_allclose(uv[idx], rec["activation"].T * 1000.0, atol=1e-9)
    assert rec["in_hull"].all()


def test_gen_dataset_is_deterministic(tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    info1 = sm.gen_dataset(out1, n_users=2, seed=5, duration_s=4.0)
    info2 = sm.gen_dataset(out2, n_users=2, seed=5, duration_s=4.0)
    assert info1["n_recordings"] == 12
    assert info1["hull_violation_frames"] == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    match, mismatch, errors = filecmp.cmpfiles(out1, out2, names, shallow=False)
    assert mismatch == [] and errors == []
    out3 = str(tmp_path / "c")
    sm.gen_dataset(out3, n_users=2, seed=6, duration_s=4.0)
    _, mismatch3, _ = filecmp.cmpfiles(out1, out3, names, shallow=False)
    assert mismatch3  # a different seed must change content


def test_gen_dataset_random_asymmetry_varies_imbalance(tmp_path):
    out = str(tmp_path / "asym")
    sm.gen_dataset(out, n_users=3, seed=9, duration_s=4.0, random_asymmetry=1.0)
    recs = sm.load_dataset(os.path.join(out, "manifest.json"))
    scores = [sm.imbalance_score(np.asarray(r.activation).T) for r in recs]
    assert max(scores) > 0.1 and min(scores) < max(scores)


def test_gen_dataset_rejects_single_user(tmp_path):
    with pytest.raises(sm.ConfigError):
        sm.gen_dataset(str(tmp_path / "x"), n_users=1, duration_s=4.0)
