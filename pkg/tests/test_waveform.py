"""Pulse shaping, subcarrier mux/demux and WDM band assembly tests."""

import math

import numpy as np
import pytest

from pcslink.errors import ConfigError
from pcslink.waveform import (
    ChannelPlan,
    SampledField,
    SubcarrierPlan,
    dbm_to_mw,
    dsm_demux,
    dsm_mux,
    frequency_shift,
    matched_filter,
    mw_to_dbm,
    pulse_shape,
    resample,
    rrc_frequency_response,
    rrc_impulse_response,
    rrc_shape,
    wdm_mux,
)


def _qpsk_symbols(rng, n):
    return (rng.choice([-1.0, 1.0], n) + 1j * rng.choice([-1.0, 1.0], n)) / math.sqrt(2)


def evm_db(a, b):
    err = np.mean(np.abs(a - b) ** 2)
    ref = np.mean(np.abs(b) ** 2)
    return 10 * math.log10(err / ref) if err > 0 else -math.inf


# ---------------------------------------------------------------------------
# Units and field container
# ---------------------------------------------------------------------------

def test_dbm_roundtrip():
    assert math.isclose(dbm_to_mw(0.0), 1.0)
    assert math.isclose(dbm_to_mw(10.0), 10.0)
    for p in (-3.0, 0.0, 12.0):
        assert math.isclose(mw_to_dbm(dbm_to_mw(p)), p)


def test_sampled_field_power_and_scaling():
    rng = np.random.default_rng(0)
    f = SampledField(
        rng.normal(size=64) + 1j * rng.normal(size=64),
        rng.normal(size=64) + 1j * rng.normal(size=64),
        10.0,
        193.0,
    )
    g = f.scaled_to_power(2.5)
    assert math.isclose(g.power_mw(), 2.5, rel_tol=1e-12)
    assert math.isclose(f.duration_ns, 6.4)


# ---------------------------------------------------------------------------
# RRC filters
# ---------------------------------------------------------------------------

def test_rrc_frequency_response_profile():
    r, beta = 10.0, 0.1
    f = np.array([0.0, 4.0, 4.49, 5.0, 5.49, 5.51, 20.0])
    h = rrc_frequency_response(f, r, beta)
    assert h[0] == 1.0 and h[1] == 1.0 and h[2] == 1.0
    assert math.isclose(h[3], math.sqrt(0.5), rel_tol=1e-12)
    assert h[4] < 0.1 and h[5] == 0.0 and h[6] == 0.0


def test_rrc_cascade_is_nyquist():
    # RRC^2 = RC must have zero ISI at symbol spacing.
    sps, nsym = 8, 64
    f = np.fft.fftfreq(sps * nsym, d=1.0 / (10.0 * sps))
    rc = rrc_frequency_response(f, 10.0, 0.1) ** 2
    taps = np.fft.ifft(rc).real
    taps = taps / taps[0]
    samples_at_symbols = taps[sps::sps]
    assert np.max(np.abs(samples_at_symbols)) < 1e-12


def test_rrc_impulse_response_unit_energy():
    h = rrc_impulse_response(10.0, 0.1, 8, 64)
    assert math.isclose(float(np.sum(h * h)), 1.0, rel_tol=1e-12)


def test_shape_then_match_recovers_symbols():
    rng = np.random.default_rng(1)
    syms = _qpsk_symbols(rng, 512)
    wave = pulse_shape(syms, 4, 10.0, 0.1)
    rec = matched_filter(wave, 4, 10.0, 0.1)
    g = np.vdot(rec, syms) / np.vdot(rec, rec)
    assert evm_db(g * rec, syms) < -250


def test_pulse_shape_ensemble_power():
    # With the ensemble symbol energy supplied the average output power over
    # many frames is 1 even though single shaped frames fluctuate.
    rng = np.random.default_rng(2)
    powers = []
    for _ in range(200):
        syms = rng.choice([-3.0, -1.0, 1.0, 3.0], 256) + 1j * rng.choice(
            [-3.0, -1.0, 1.0, 3.0], 256
        )
        wave = pulse_shape(syms, 4, 10.0, 0.1, mean_symbol_energy=10.0)
        powers.append(float(np.mean(np.abs(wave) ** 2)))
    assert math.isclose(float(np.mean(powers)), 1.0, rel_tol=0.02)
    assert np.std(powers) > 1e-3  # per-frame fluctuation is preserved


def test_rrc_shape_validates_rate():
    with pytest.raises(ConfigError):
        rrc_shape(np.ones(16, complex), np.ones(16, complex), 10.0, 0.1, 15.0)


# ---------------------------------------------------------------------------
# Spectral shift / resample
# ---------------------------------------------------------------------------

def test_frequency_shift_roundtrip_exact():
    rng = np.random.default_rng(3)
    f = SampledField(
        rng.normal(size=256) + 1j * rng.normal(size=256),
        rng.normal(size=256) + 1j * rng.normal(size=256),
        20.0,
        193.0,
    )
    g = frequency_shift(frequency_shift(f, 6.25), -6.25)
    assert np.allclose(g.x, f.x, atol=1e-12)
    assert np.allclose(g.y, f.y, atol=1e-12)


def test_resample_preserves_band_content():
    rng = np.random.default_rng(4)
    syms = _qpsk_symbols(rng, 128)
    wave = pulse_shape(syms, 2, 10.0, 0.1)
    f = SampledField(wave, wave.copy(), 20.0, 193.0)
    up = resample(f, 80.0)
    back = resample(up, 20.0)
    assert np.allclose(back.x, f.x, atol=1e-9)
    assert math.isclose(up.power_mw(), f.power_mw(), rel_tol=1e-9)


def test_resample_rejects_bad_ratio():
    f = SampledField(np.ones(10, complex), np.ones(10, complex), 10.0, 0.0)
    with pytest.raises(ConfigError):
        resample(f, 10.3)


# ---------------------------------------------------------------------------
# Subcarrier plans and mux/demux
# ---------------------------------------------------------------------------

def test_subcarrier_plan_rates():
    for n_sc in (1, 2, 4, 8):
        plan = SubcarrierPlan(n_sc, aggregate_gbd=78.8)
        assert math.isclose(plan.r_sym_gbd * n_sc, 78.8)
        assert plan.occupied_ghz < 100.0
        assert len(plan.offsets_ghz) == n_sc
        assert math.isclose(sum(plan.offsets_ghz), 0.0, abs_tol=1e-9)
    with pytest.raises(ConfigError):
        SubcarrierPlan(3)


def test_dsm_mux_demux_transparent():
    # Build each subcarrier from known symbols, mux, demux, and compare.
    agg = 78.8
    for n_sc in (1, 2, 4):
        plan = SubcarrierPlan(n_sc, aggregate_gbd=agg)
        rng = np.random.default_rng(100 + n_sc)
        nsym = 256
        subs, ref = [], []
        for _ in range(n_sc):
            sx = _qpsk_symbols(rng, nsym)
            sy = _qpsk_symbols(rng, nsym)
            subs.append(rrc_shape(sx, sy, plan.r_sym_gbd, plan.rolloff, 4 * agg, 1.0))
            ref.append((sx, sy))
        muxed = dsm_mux(subs, plan)
        rec = dsm_demux(muxed, plan)
        for (sx, sy), (rx, ry) in zip(ref, rec):
            gx = np.vdot(rx, sx) / np.vdot(rx, rx)
            gy = np.vdot(ry, sy) / np.vdot(ry, ry)
            assert evm_db(gx * rx, sx) < -200
            assert evm_db(gy * ry, sy) < -200


def test_dsm_mux_validates_inputs():
    plan = SubcarrierPlan(2, aggregate_gbd=78.8)
    one = SampledField(np.ones(64, complex), np.ones(64, complex), 4 * 78.8, 193.0)
    with pytest.raises(ConfigError):
        dsm_mux([one], plan)


# ---------------------------------------------------------------------------
# Channel plans and WDM mux
# ---------------------------------------------------------------------------

def test_channel_plans():
    paper = ChannelPlan.paper()
    assert paper.num_channels == 37
    assert math.isclose(paper.frequencies_thz[0], 192.1)
    assert math.isclose(paper.frequencies_thz[-1], 195.7)
    assert math.isclose(paper.offset_ghz(19), 0.0, abs_tol=1e-9)
    mini = ChannelPlan.mini()
    assert mini.num_channels == 5
    assert math.isclose(mini.offset_ghz(3), 0.0, abs_tol=1e-9)
    assert math.isclose(mini.offset_ghz(1), -50.0, abs_tol=1e-9)
    with pytest.raises(ConfigError):
        mini.offset_ghz(6)


def test_wdm_mux_total_power_and_spectrum():
    plan = ChannelPlan.mini()
    rng = np.random.default_rng(7)
    channels = {}
    for idx in (1, 3, 5):
        # Band-limited content so each channel stays inside its 25 GHz slot.
        sx = _qpsk_symbols(rng, 512)
        sy = _qpsk_symbols(rng, 512)
        channels[idx] = rrc_shape(
            sx, sy, 19.7, 0.1, plan.channel_sample_rate_ghz, 1.0
        )
    band = wdm_mux(channels, plan, total_power_dbm=10.0)
    # Uniform per-channel power: 3 of 5 channels present.
    expect = dbm_to_mw(10.0) * 3 / 5
    assert math.isclose(band.power_mw(), expect, rel_tol=0.05)
    # Energy sits in the right 25 GHz slots.
    f, psd = band.psd()
    for idx in (1, 3, 5):
        off = plan.offset_ghz(idx)
        in_slot = psd[np.abs(f - off) < 12.5].sum()
        assert in_slot > 0.2 * psd.sum()
    empty = psd[np.abs(f - plan.offset_ghz(2)) < 10.0].sum()
    assert empty < 1e-3 * psd.sum()
