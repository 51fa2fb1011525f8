import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sonarblob.errors import ParameterError
from sonarblob.signalproc import ChirpSpec, build_point_cloud, make_chirp, matched_filter, spectral_entropy
from sonarblob.simulate import (
    ClutterBank,
    ScenarioConfig,
    SyntheticClutter,
    choose_valid,
    gen_clutter_synthetic,
    gen_impulse,
    gen_path,
    make_scenario,
    measured_scr_db,
    range_bounds,
    reflect,
    set_scr,
    synth_block,
    synth_ping,
    target_echo,
    with_settings,
)

CHIRP = ChirpSpec()
BAND = (CHIRP.f_min, CHIRP.f_max)


# path

def test_path_constant_without_noise():
    path = gen_path(1, 20, 0.0, (5.0, 60.0))
    assert np.all(path == path[0])


def test_path_step_std():
    # wide bounds so reflections do not disturb the step statistics
    path = gen_path(2, 100_001, 2.0, (0.0, 1e8))
    assert abs(np.std(np.diff(path)) - 2.0) < 0.05


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 30.0))
def test_path_within_bounds(seed, sigma):
    lo, hi = range_bounds(CHIRP, ScenarioConfig())
    path = gen_path(seed, 20, sigma, (lo, hi))
    assert np.all((path >= lo) & (path <= hi))


def test_range_bounds_default():
    lo, hi = range_bounds(CHIRP, ScenarioConfig())
    assert np.isclose(lo, 7.5)
    assert 59 < hi < 60
    with pytest.raises(ParameterError):
        range_bounds(CHIRP, ScenarioConfig(segment_duration=0.012))


def test_reflect_folds_into_interval():
    np.testing.assert_allclose(reflect(np.array([-1.0, 11.0, 25.0, 5.0]), 0.0, 10.0), [1.0, 9.0, 5.0, 5.0])


def test_path_rejects_negative_sigma():
    with pytest.raises(ParameterError):
        gen_path(0, 5, -1.0, (0.0, 10.0))


# impulse

def test_impulse_unit_norm_and_deterministic():
    h = gen_impulse(5)
    assert len(h) == 100
    assert abs(np.linalg.norm(h) - 1.0) < 1e-12
    np.testing.assert_array_equal(h, gen_impulse(5))


def test_impulse_entries_symmetric():
    vals = np.concatenate([gen_impulse(s) for s in range(100)])  # 10^4 entries
    assert abs(np.mean(vals)) < 3 * vals.std() / np.sqrt(len(vals))
    skew = np.mean((vals - vals.mean()) ** 3) / vals.std() ** 3
    assert abs(skew) < 0.1
    # each scaled entry is at most 1 / ||raw|| and the raw norm is about sqrt(100 / 3)
    assert np.abs(vals).max() < 1.0 / np.sqrt(100 / 3) * 1.6


# valid pings

def test_valid_fraction_counts():
    rng = np.random.default_rng(0)
    assert choose_valid(rng, 20, 0.7).sum() == 14
    assert choose_valid(rng, 20, 0.0).sum() == 0
    assert choose_valid(rng, 20, 1.0).all()


def test_valid_subsets_nested():
    s = make_scenario(11, ScenarioConfig(valid_fraction=0.7), CHIRP)
    full = with_settings(s, valid_fraction=1.0)
    half = with_settings(s, valid_fraction=0.35)
    assert np.all(full.valid[s.valid]) and np.all(s.valid[half.valid])


def test_valid_pings_one_based():
    s = make_scenario(3, ScenarioConfig(valid_fraction=0.5), CHIRP)
    np.testing.assert_array_equal(s.valid_pings, np.flatnonzero(s.valid) + 1)
    assert len(make_scenario(3, ScenarioConfig(), CHIRP, has_target=False).valid_pings) == 0


@pytest.mark.parametrize("kwargs", [dict(n_pings=0), dict(valid_fraction=1.5), dict(sigma_n=-1), dict(t_pri=0)])
def test_scenario_config_rejected(kwargs):
    with pytest.raises(ParameterError):
        ScenarioConfig(**kwargs)


# SCR

def test_scr_zero_db(rng):
    target, clutter = rng.normal(size=2000), 3 * rng.normal(size=9000)
    k = set_scr(target, clutter, 0.0)
    assert abs(measured_scr_db(k * target, clutter)) < 1e-6


def test_scr_in_band(rng):
    target = make_chirp(CHIRP)
    clutter = gen_clutter_synthetic(0, 0.09, CHIRP.sample_rate)
    k = set_scr(target, clutter, -9.0, BAND, CHIRP.sample_rate)
    assert abs(measured_scr_db(k * target, clutter, BAND, CHIRP.sample_rate) + 9.0) < 1e-9


def test_scr_halving_scale(rng):
    target, clutter = rng.normal(size=1000), rng.normal(size=5000)
    k = set_scr(target, clutter, -9.0)
    drop = measured_scr_db(k * target, clutter) - measured_scr_db(0.5 * k * target, clutter)
    assert abs(drop - 20 * np.log10(2)) < 1e-9
    assert abs(drop - 6.02) < 0.01


def test_scr_zero_clutter_rejected():
    with pytest.raises(ParameterError):
        set_scr(np.ones(10), np.zeros(10), 0.0)
    with pytest.raises(ParameterError):
        set_scr(np.ones(10), np.zeros(0), 0.0)


# clutter

def test_clutter_deterministic():
    a = gen_clutter_synthetic(4, 0.05, CHIRP.sample_rate)
    b = gen_clutter_synthetic(4, 0.05, CHIRP.sample_rate)
    assert a.tobytes() == b.tobytes()


def test_clutter_without_scatterers_is_band_noise():
    x = gen_clutter_synthetic(4, 0.5, CHIRP.sample_rate, scatterer_rate=0.0, noise_power=1.0)
    assert abs(np.mean(x * x) - 1.0) < 1e-9
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / CHIRP.sample_rate)
    inband = spec[(f >= 6_000) & (f <= 18_000)].sum() / spec.sum()
    assert inband > 0.97


def test_clutter_rejects_bad_duration():
    with pytest.raises(ParameterError):
        gen_clutter_synthetic(0, 0.0, CHIRP.sample_rate)


def test_clutter_entropy_exceeds_target_entropy():
    # the working premise of the detector: clutter windows are less frequency-diverse
    h_t, h_c = [], []
    clutter = SyntheticClutter(CHIRP)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for seed in range(8):
            s = make_scenario(seed, ScenarioConfig(scr_db=0.0), CHIRP)
            cloud = build_point_cloud(synth_block(s, CHIRP, clutter), CHIRP, 5e-6)
            near = np.abs(cloud.ranges - s.path[cloud.pings - 1]) < 0.5
            h_t.extend(cloud.entropies[near])
            h_c.extend(cloud.entropies[~near])
    assert np.mean(h_c) > np.mean(h_t)


def test_clutter_bank_draws_and_rejects_short():
    bank = ClutterBank([np.arange(100.0), np.arange(50.0)], CHIRP.sample_rate)
    seg = bank.draw(np.random.default_rng(0), 80)
    assert len(seg) == 80 and np.all(np.diff(seg) == 1)
    with pytest.raises(ParameterError):
        bank.draw(np.random.default_rng(0), 101)
    with pytest.raises(ParameterError):
        ClutterBank([], CHIRP.sample_rate)


def test_synth_ping_short_bank_rejected():
    s = make_scenario(0, ScenarioConfig(), CHIRP)
    with pytest.raises(ParameterError):
        synth_ping(s, 1, CHIRP, ClutterBank([np.zeros(1000)], CHIRP.sample_rate))


# synthesis

def test_pure_clutter_when_no_valid_pings():
    clutter = SyntheticClutter(CHIRP)
    s = make_scenario(9, ScenarioConfig(valid_fraction=0.0), CHIRP)
    c = make_scenario(9, ScenarioConfig(), CHIRP, has_target=False)
    for a, b in zip(synth_block(s, CHIRP, clutter), synth_block(c, CHIRP, clutter)):
        assert a.samples.tobytes() == b.samples.tobytes()


def test_replacement_leaves_clutter_bit_exact():
    clutter = SyntheticClutter(CHIRP)
    s = make_scenario(21, ScenarioConfig(valid_fraction=0.7), CHIRP)
    c = make_scenario(21, ScenarioConfig(), CHIRP, has_target=False)
    n_echo = CHIRP.n_samples
    for m, (a, b) in enumerate(zip(synth_block(s, CHIRP, clutter), synth_block(c, CHIRP, clutter)), start=1):
        outside = np.ones(len(a.samples), dtype=bool)
        if s.valid[m - 1]:
            start = int(round(2 * s.path[m - 1] / CHIRP.sound_speed * CHIRP.sample_rate))
            outside[start : start + n_echo] = False
            k = set_scr(target_echo(s, CHIRP), b.samples, s.config.scr_db, BAND, CHIRP.sample_rate)
            np.testing.assert_allclose(a.samples[~outside], k * target_echo(s, CHIRP), rtol=0, atol=0)
        assert np.array_equal(a.samples[outside], b.samples[outside])


def test_additive_mode_adds_echo():
    clutter = SyntheticClutter(CHIRP)
    s = make_scenario(2, ScenarioConfig(additive=True), CHIRP)
    c = make_scenario(2, ScenarioConfig(), CHIRP, has_target=False)
    a, b = synth_ping(s, 1, CHIRP, clutter), synth_ping(c, 1, CHIRP, clutter)
    start = int(round(2 * s.path[0] / CHIRP.sound_speed * CHIRP.sample_rate))
    diff = a.samples - b.samples
    assert np.any(diff[start : start + CHIRP.n_samples] != 0)
    assert np.all(np.delete(diff, np.arange(start, start + CHIRP.n_samples)) == 0)


def test_mf_peak_at_target_delay_high_scr():
    clutter = SyntheticClutter(CHIRP)
    replica = make_chirp(CHIRP)
    for seed in range(5):
        s = make_scenario(seed, ScenarioConfig(scr_db=20.0), CHIRP)
        for m in (1, 7, 20):
            ping = synth_ping(s, m, CHIRP, clutter)
            t_m = 2 * s.path[m - 1] / CHIRP.sound_speed * CHIRP.sample_rate
            # the impulse response smears the echo over 100 taps, so the peak
            # lands somewhere inside [T_m, T_m + 100)
            peak = np.argmax(matched_filter(ping, replica))
            assert t_m - 1 <= peak < t_m + len(s.impulse) + 1


def test_mf_peak_exact_for_unit_impulse():
    clutter = SyntheticClutter(CHIRP)
    replica = make_chirp(CHIRP)
    s = make_scenario(8, ScenarioConfig(scr_db=20.0), CHIRP)
    impulse = np.zeros(100)
    impulse[0] = 1.0
    from dataclasses import replace

    s = replace(s, impulse=impulse)
    for m in range(1, 21):
        ping = synth_ping(s, m, CHIRP, clutter)
        t_m = 2 * s.path[m - 1] / CHIRP.sound_speed * CHIRP.sample_rate
        assert abs(np.argmax(matched_filter(ping, replica)) - t_m) <= 1


def test_scenario_reproducible():
    clutter = SyntheticClutter(CHIRP)
    a = synth_block(make_scenario(77, ScenarioConfig(), CHIRP), CHIRP, clutter)
    b = synth_block(make_scenario(77, ScenarioConfig(), CHIRP), CHIRP, clutter)
    assert all(x.samples.tobytes() == y.samples.tobytes() for x, y in zip(a, b))


def test_truth_dict_matches_path():
    s = make_scenario(5, ScenarioConfig(), CHIRP)
    assert s.truth_dict()["path_m"] == list(s.path)


def test_synth_ping_index_checked():
    s = make_scenario(0, ScenarioConfig(), CHIRP)
    with pytest.raises(ParameterError):
        synth_ping(s, 21, CHIRP, SyntheticClutter(CHIRP))
