"""End-to-end pipeline tests: framing budgets, B2B runs, WDM runs."""

import math
from fractions import Fraction

import numpy as np
import pytest

from pcslink.config import mini_link
from pcslink.errors import ConfigError
from pcslink.pas import RateConfig
from pcslink.shaping import ALPHABET_16QAM, ShapingConfig, make_codec
from pcslink.simulate import (
    ModulationFormat,
    QpskCodec,
    WdmSimulation,
    b2b_run,
    build_frame,
    format_codec,
)


def _fmt(n=20, n_sc=2, rate=Fraction(4, 5)):
    return ModulationFormat(n, n_sc, rate, ALPHABET_16QAM)


QPSK_FMT = ModulationFormat(4, 2, None, ALPHABET_16QAM)


# ---------------------------------------------------------------------------
# Codec factory and frame budgets
# ---------------------------------------------------------------------------

def test_format_codec_kinds():
    assert format_codec(_fmt(n=20)).kind == "ess"
    assert format_codec(_fmt(n=320)).kind == "ess"
    assert format_codec(_fmt(n=1280)).kind == "ccdm"
    assert isinstance(format_codec(QPSK_FMT), QpskCodec)


def test_qpsk_codec_degenerate():
    c = QpskCodec()
    assert c.k == 0 and c.n == 4
    assert c.encode(0) == (1, 1, 1, 1)
    assert c.decode((1, 1, 1, 1)) == 0
    assert c.avg_energy_per_amplitude() == 1.0
    with pytest.raises(Exception):
        c.encode(1)
    with pytest.raises(Exception):
        c.decode((1, 1, 1, 3))


def test_build_frame_budget():
    codec = make_codec(ShapingConfig(20, Fraction(4, 5), ALPHABET_16QAM, "ess"))
    rates = RateConfig()
    budget = 1536
    frm = build_frame(codec, budget, rates, seed=0)
    assert frm.num_symbols <= budget
    data = int((~frm.pilot_mask).sum())
    assert data % 5 == 0               # whole blocks of 20 amplitudes = 5 symbols
    assert data >= budget - budget // 48 - 5
    # 1536 budget minus 32 pilots leaves 1504 data symbols: 300 blocks.
    assert frm.ledger["num_blocks"] == 300


def test_build_frame_block_1280():
    codec = make_codec(ShapingConfig(1280, Fraction(4, 5), ALPHABET_16QAM, "ccdm"))
    frm = build_frame(codec, 1536, RateConfig(), seed=0)
    assert frm.ledger["num_blocks"] == 4
    assert int((~frm.pilot_mask).sum()) == 4 * 320


# ---------------------------------------------------------------------------
# Back-to-back runs
# ---------------------------------------------------------------------------

def test_b2b_snr_matches_target():
    for n_sc in (1, 2, 4):
        rep = b2b_run(_fmt(n_sc=n_sc), RateConfig(), 19.7, 78.8,
                      snr_db_target=15.0, symbols=8192, seed=1)
        assert abs(rep.snr_db - 15.0) < 0.2
        # One entry per subcarrier and polarization.
        assert len(rep.snr_db_per_subcarrier) == 2 * n_sc
        assert not rep.snr_capped


def test_b2b_dsm_is_snr_neutral():
    # All subcarrier counts should land on the same SNR within a small spread.
    snrs = [
        b2b_run(_fmt(n_sc=n_sc), RateConfig(), 19.7, 78.8, 12.0, 8192, 7).snr_db
        for n_sc in (1, 2, 4, 8)
    ]
    assert max(snrs) - min(snrs) < 0.2


def test_b2b_ngmi_increases_with_snr():
    vals = [
        b2b_run(_fmt(), RateConfig(), 19.7, 78.8, s, 8192, 3).ngmi
        for s in (6.0, 10.0, 14.0)
    ]
    assert vals[0] < vals[1] < vals[2]


def test_b2b_qpsk_runs():
    rep = b2b_run(QPSK_FMT, RateConfig(), 19.7, 78.8, 8.0, 8192, 4)
    assert abs(rep.snr_db - 8.0) < 0.3
    assert 0.0 < rep.ngmi <= 1.0
    # QPSK carries one bit per real dimension.
    assert rep.gmi_bits_per_pdm <= 4.0 + 1e-9


# ---------------------------------------------------------------------------
# Full WDM simulation
# ---------------------------------------------------------------------------

def _small_sim(**overrides):
    cfg = mini_link()
    kw = dict(
        link=cfg.link,
        channel_plan=cfg.channel_plan,
        rates=cfg.rates,
        aggregate_gbd=cfg.aggregate_gbd,
        total_power_dbm=cfg.total_power_dbm,
        symbols_per_channel=2048,
        base_seed=7,
        measure_channels=(1, 3),
    )
    kw.update(overrides)
    return WdmSimulation(**kw)


def test_wdm_run_reports_and_cache():
    sim = _small_sim()
    fmt = _fmt(n=20, n_sc=2)
    reports = sim.run(fmt, seed_offset=0)
    assert set(reports) == {1, 3}
    for rep in reports.values():
        assert 0.0 < rep.snr_db < 30.0
        assert 0.0 < rep.ngmi <= 1.0
        assert rep.num_pdm_symbols >= 1000
    again = sim.run(fmt, seed_offset=0)
    assert again is reports            # cached, not recomputed


def test_wdm_run_deterministic_across_instances():
    a = _small_sim().run(_fmt(n=20, n_sc=2), seed_offset=0)
    b = _small_sim().run(_fmt(n=20, n_sc=2), seed_offset=0)
    assert a[1].snr_db == b[1].snr_db
    assert a[1].gmi_bits_per_pdm == b[1].gmi_bits_per_pdm
    c = _small_sim().run(_fmt(n=20, n_sc=2), seed_offset=1)
    assert c[1].snr_db != a[1].snr_db


def test_wdm_net_dispersion_per_loop():
    sim = _small_sim()
    # The desk-scale map is compensated at channel 1 and walks off with
    # channel index.
    nets = [sim.net_dispersion_per_loop(i) for i in range(1, 6)]
    assert abs(nets[0]) < 100
    assert all(b > a for a, b in zip(nets, nets[1:]))
    assert abs(nets[4]) > 10 * max(100, abs(nets[0]))
