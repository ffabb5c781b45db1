"""Fiber model tests: dispersion arithmetic, split-step integrator, ASE."""

import math

import numpy as np
import pytest

from pcslink.errors import ConfigError
from pcslink.fiber import (
    LinkSpec,
    SpanSpec,
    _ase_variance_mw,
    dispersion_map,
    link_linear_phase,
    propagate,
    wavelength_nm,
)
from pcslink.rxdsp import cdc
from pcslink.waveform import SampledField, pulse_shape


def _field(rng, n=4096, rate=80.0, freq=193.0, power_mw=1.0):
    syms = (rng.choice([-1.0, 1.0], n // 4) + 1j * rng.choice([-1.0, 1.0], n // 4))
    x = pulse_shape(syms, 4, rate / 4 / 1.2, 0.2)
    y = pulse_shape(syms[::-1].copy(), 4, rate / 4 / 1.2, 0.2)
    return SampledField(x, y, rate, freq).scaled_to_power(power_mw)


# ---------------------------------------------------------------------------
# Dispersion coefficients, SI cross-check
# ---------------------------------------------------------------------------

def test_beta2_matches_si_computation():
    span = SpanSpec(40.3, 17.24, 0.092, 0.20, 1.3)
    freq = 193.4
    lam_m = wavelength_nm(freq) * 1e-9
    c = 299792458.0
    d_si = span.d_at(freq) * 1e-6            # ps/nm/km -> s/m/m
    beta2_si = -d_si * lam_m**2 / (2 * math.pi * c)   # s^2/m
    beta2 = beta2_si * 1e24 * 1e3            # -> ps^2/km
    assert math.isclose(span.beta2_ps2_km(freq), beta2, rel_tol=1e-12)
    assert -22.5 < beta2 < -21.5             # textbook value for D ~ 17 ps/nm/km


def test_beta3_matches_si_computation():
    span = SpanSpec(40.3, 17.24, 0.092, 0.20, 1.3)
    freq = 193.4
    lam_m = wavelength_nm(freq) * 1e-9
    c = 299792458.0
    d_si = span.d_at(freq) * 1e-6
    s_si = span.slope_ps_nm2_km * 1e3        # ps/nm^2/km -> s/m^2/m
    beta3_si = (lam_m**2 / (2 * math.pi * c)) ** 2 * (s_si + 2 * d_si / lam_m)
    beta3 = beta3_si * 1e36 * 1e3            # -> ps^3/km
    assert math.isclose(span.beta3_ps3_km(freq), beta3, rel_tol=1e-12)
    assert 0.1 < beta3 < 0.2


def test_dispersion_varies_with_slope():
    span = SpanSpec(10.0, 17.24, 0.092, 0.2, 1.3, lambda_ref_nm=1550.13)
    f_ref = 299792.458 / 1550.13
    assert math.isclose(span.d_at(f_ref), 17.24, rel_tol=1e-9)
    lam_lo = wavelength_nm(f_ref + 1.0)
    assert math.isclose(
        span.d_at(f_ref + 1.0), 17.24 + 0.092 * (lam_lo - 1550.13), rel_tol=1e-12
    )


def test_span_validation():
    with pytest.raises(ConfigError):
        SpanSpec(0.0, 17.0, 0.09, 0.2, 1.3)
    with pytest.raises(ConfigError):
        SpanSpec(10.0, 17.0, 0.09, -0.1, 1.3)


# ---------------------------------------------------------------------------
# Dispersion map
# ---------------------------------------------------------------------------

def test_dispersion_map_exact_piecewise():
    link = LinkSpec.paper()
    freq = 193.0
    profile, net = dispersion_map(link, freq)
    manual = sum(s.d_at(freq) * s.length_km for s in link.spans)
    assert math.isclose(net, manual, rel_tol=1e-12)
    assert len(profile) == 1 + 7 * link.num_loops
    assert profile[0] == (0.0, 0.0)
    dist, acc = profile[-1]
    assert math.isclose(dist, link.total_length_km, rel_tol=1e-12)
    assert math.isclose(acc, link.num_loops * net, rel_tol=1e-12)
    # Monotone distance, one point per span boundary.
    dists = [p[0] for p in profile]
    assert all(b > a for a, b in zip(dists, dists[1:]))


def test_paper_map_sign_structure():
    # The paper-scale loop over-compensates at the red band edge, is close
    # to flat near the middle, and under-compensates at the blue edge.
    link = LinkSpec.paper()
    assert dispersion_map(link, 192.3)[1] < -50
    assert abs(dispersion_map(link, 192.8)[1]) < 15
    assert dispersion_map(link, 195.2)[1] > 300


def test_link_linear_phase_additivity():
    link1 = LinkSpec.paper(num_loops=1)
    link3 = LinkSpec.paper(num_loops=3)
    omega = np.linspace(-2.0, 2.0, 33)
    assert np.allclose(
        link_linear_phase(link3, omega, 193.0),
        3.0 * link_linear_phase(link1, omega, 193.0),
        rtol=1e-12,
    )


# ---------------------------------------------------------------------------
# Split-step integrator
# ---------------------------------------------------------------------------

def _single_span_link(span, **kw):
    defaults = dict(num_loops=1, noise_figure_db=None, dge_policy="none",
                    step_km=0.1, max_phase_per_step_rad=0.005)
    defaults.update(kw)
    return LinkSpec(spans=(span,), **defaults)


def test_cw_nonlinear_phase():
    # Constant envelope, no dispersion or loss: the Manakov rotation is
    # exactly (8/9) gamma (P_x + P_y) L for both polarizations.
    gamma, length, p_mw = 1.3, 40.0, 5.0
    span = SpanSpec(length, 0.0, 0.0, 0.0, gamma)
    link = _single_span_link(span)
    amp = math.sqrt(p_mw / 2.0)
    f = SampledField(np.full(256, amp, complex), np.full(256, amp, complex), 50.0, 193.0)
    out = propagate(f, link, seed=0)
    expected = (8.0 / 9.0) * gamma * p_mw * 1e-3 * length
    phase_x = np.angle(out.x / f.x)
    phase_y = np.angle(out.y / f.y)
    assert np.allclose(phase_x, expected, atol=1e-6)
    assert np.allclose(phase_y, expected, atol=1e-6)
    assert math.isclose(out.power_mw(), p_mw, rel_tol=1e-9)


def test_power_conserved_without_loss_and_noise():
    rng = np.random.default_rng(5)
    f = _field(rng, power_mw=3.0)
    span = SpanSpec(40.0, 17.24, 0.092, 0.0, 1.3)
    out = propagate(f, _single_span_link(span), seed=1)
    assert math.isclose(out.power_mw(), f.power_mw(), rel_tol=1e-6)


def test_amplifier_exactly_restores_span_loss():
    rng = np.random.default_rng(6)
    f = _field(rng, power_mw=2.0)
    span = SpanSpec(40.0, 17.24, 0.092, 0.2, 0.0)
    out = propagate(f, _single_span_link(span), seed=2)
    assert math.isclose(out.power_mw(), f.power_mw(), rel_tol=1e-9)


def test_linear_propagation_inverted_by_cdc():
    rng = np.random.default_rng(7)
    f = _field(rng, power_mw=1.0)
    spans = tuple(
        SpanSpec(s.length_km, s.d_ps_nm_km, s.slope_ps_nm2_km, s.attenuation_db_km, 0.0)
        for s in LinkSpec.paper().spans
    )
    link = LinkSpec(spans=spans, num_loops=2, noise_figure_db=None, dge_policy="none")
    out = propagate(f, link, seed=3)
    rec = cdc(out, link, f.center_freq_thz, f.center_freq_thz)
    err = np.mean(np.abs(rec.x - f.x) ** 2 + np.abs(rec.y - f.y) ** 2)
    sig = np.mean(np.abs(f.x) ** 2 + np.abs(f.y) ** 2)
    assert 10 * math.log10(sig / err) > 40.0


def test_step_halving_converges():
    rng = np.random.default_rng(8)
    f = _field(rng, power_mw=4.0)
    span = SpanSpec(40.0, 17.24, 0.092, 0.2, 1.3)
    coarse = propagate(f, _single_span_link(span, step_km=0.5), seed=0)
    fine = propagate(f, _single_span_link(span, step_km=0.25), seed=0)
    rms = math.sqrt(float(np.mean(np.abs(coarse.x - fine.x) ** 2
                                  + np.abs(coarse.y - fine.y) ** 2)))
    ref = math.sqrt(f.power_mw())
    assert rms / ref < 1e-4


def test_propagation_deterministic_per_seed():
    rng = np.random.default_rng(9)
    f = _field(rng, power_mw=1.0)
    span = SpanSpec(40.0, 17.24, 0.092, 0.2, 1.3)
    link = _single_span_link(span, noise_figure_db=5.0)
    a = propagate(f, link, seed=42)
    b = propagate(f, link, seed=42)
    c = propagate(f, link, seed=43)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.x, c.x)


def test_ase_variance_accounting():
    # Zero launch field: output power is pure ASE, twice the per-pol value.
    gain_db = 10.0
    span = SpanSpec(50.0, 0.0, 0.0, 0.2, 0.0)
    link = _single_span_link(span, noise_figure_db=5.0)
    n = 1 << 16
    f = SampledField(np.zeros(n, complex), np.zeros(n, complex), 80.0, 193.0)
    out = propagate(f, link, seed=4)
    var = _ase_variance_mw(gain_db, 5.0, 193.0, 80.0)
    assert var > 0
    assert math.isclose(out.power_mw(), 2 * var, rel_tol=0.03)


def test_ase_off_when_nf_none():
    span = SpanSpec(50.0, 0.0, 0.0, 0.2, 0.0)
    link = _single_span_link(span, noise_figure_db=None)
    f = SampledField(np.zeros(64, complex), np.zeros(64, complex), 80.0, 193.0)
    out = propagate(f, link, seed=0)
    assert out.power_mw() == 0.0


def test_link_validation():
    span = SpanSpec(10.0, 17.0, 0.09, 0.2, 1.3)
    with pytest.raises(ConfigError):
        LinkSpec(spans=(), num_loops=1)
    with pytest.raises(ConfigError):
        LinkSpec(spans=(span,), num_loops=0)
    with pytest.raises(ConfigError):
        LinkSpec(spans=(span,), dge_policy="magic")
    with pytest.raises(ConfigError):
        LinkSpec(spans=(span,), step_km=0.0)
