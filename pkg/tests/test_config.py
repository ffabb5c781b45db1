"""Configuration presets, serialization round-trips and provenance hashes."""

import json
import math

import pytest

from pcslink.config import PRESETS, config_from_dict, mini_link, paper_scale
from pcslink.errors import ConfigError


def test_presets_registered():
    assert set(PRESETS) == {"mini-link", "paper-scale"}


def test_paper_scale_shape():
    cfg = paper_scale()
    assert cfg.channel_plan.num_channels == 37
    assert cfg.link.num_loops == 10
    assert len(cfg.link.spans) == 7
    assert math.isclose(cfg.aggregate_gbd, 78.8)
    assert cfg.total_power_dbm == 12.0
    assert cfg.rates.ngmi_threshold == 0.861
    # One SSMF span per loop, the rest is negative-dispersion fiber.
    positives = [s for s in cfg.link.spans if s.d_ps_nm_km > 0]
    assert len(positives) == 1
    assert math.isclose(positives[0].d_ps_nm_km, 17.24)


def test_mini_link_shape():
    cfg = mini_link()
    assert cfg.channel_plan.num_channels == 5
    assert cfg.link.num_loops == 2
    assert math.isclose(cfg.aggregate_gbd, 19.7)
    assert cfg.symbols_per_channel >= 12288
    # The mini map is dispersion-compensated at channel 1 and walks off
    # roughly linearly with the channel index.
    from pcslink.fiber import dispersion_map
    nets = [dispersion_map(cfg.link, f)[1] for f in cfg.channel_plan.frequencies_thz]
    assert abs(nets[0]) < 100
    steps = [b - a for a, b in zip(nets, nets[1:])]
    assert all(s > 1000 for s in steps)
    assert max(steps) / min(steps) < 1.2


def test_roundtrip_through_dict_preserves_hash():
    for factory in (mini_link, paper_scale):
        cfg = factory()
        again = config_from_dict(cfg.to_dict())
        assert again.config_hash() == cfg.config_hash()
        assert again.to_json() == cfg.to_json()


def test_roundtrip_through_json_text():
    cfg = mini_link(seed=123, total_power_dbm=9.0)
    data = json.loads(cfg.to_json())
    again = config_from_dict(data)
    assert again.seed == 123
    assert again.total_power_dbm == 9.0
    assert again.config_hash() == cfg.config_hash()


def test_hash_sensitive_to_any_field():
    base = mini_link()
    assert mini_link(seed=1).config_hash() != base.config_hash()
    assert mini_link(total_power_dbm=8.0).config_hash() != base.config_hash()
    assert mini_link(symbols_per_channel=4096).config_hash() != base.config_hash()
    # The hash is stable across processes: no ids, no float repr drift.
    assert base.config_hash() == mini_link().config_hash()


def test_invalid_config_reports_offending_path():
    data = mini_link().to_dict()
    data["link"]["spans"][2]["length_km"] = -1.0
    with pytest.raises(ConfigError, match=r"link\.spans\[2\]"):
        config_from_dict(data)

    data = mini_link().to_dict()
    data["rates"]["code_rate"] = 1.5
    with pytest.raises(ConfigError, match="rates"):
        config_from_dict(data)

    data = mini_link().to_dict()
    data["grid"]["n_grid"] = [40, 20]
    with pytest.raises(ConfigError, match="grid"):
        config_from_dict(data)


def test_runconfig_validation():
    with pytest.raises(ConfigError):
        mini_link(symbols_per_channel=512)
    with pytest.raises(ConfigError):
        mini_link(aggregate_gbd=0.0)
    with pytest.raises(ConfigError):
        mini_link(workers=0)
