"""Run configuration: presets, JSON round-trip, and provenance hashing.

Two presets ship with the package.  ``paper-scale`` is the full 37-channel
C-band system (heavy; meant for long hardware runs or dry-run validation).
``mini-link`` is a 5-channel desk-scale system running at a quarter of the
symbol rate with the dispersion map rescaled so the per-loop walk-off,
measured in symbol durations, matches the full system; it exists to make
trend experiments finish in minutes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError
from .fiber import LinkSpec, SpanSpec
from .optimize import SearchGrid
from .pas import RateConfig
from .shaping import AmplitudeAlphabet, ALPHABET_16QAM
from .waveform import ChannelPlan

__all__ = [
    "RunConfig",
    "mini_link",
    "paper_scale",
    "config_from_dict",
    "PRESETS",
]

PAPER_AGGREGATE_GBD = 78.8
MINI_AGGREGATE_GBD = 19.7


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation campaign needs, serializable and hashable."""

    preset: str
    link: LinkSpec
    channel_plan: ChannelPlan
    rates: RateConfig
    grid: SearchGrid
    aggregate_gbd: float
    total_power_dbm: float
    symbols_per_channel: int
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if self.aggregate_gbd <= 0:
            raise ConfigError("aggregate_gbd must be positive")
        if self.symbols_per_channel < 1024:
            raise ConfigError("symbols_per_channel must be at least 1024")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "aggregate_gbd": self.aggregate_gbd,
            "total_power_dbm": self.total_power_dbm,
            "symbols_per_channel": self.symbols_per_channel,
            "link": {
                "num_loops": self.link.num_loops,
                "noise_figure_db": self.link.noise_figure_db,
                "dge_policy": self.link.dge_policy,
                "dge_max_excursion_db": self.link.dge_max_excursion_db,
                "step_km": self.link.step_km,
                "max_phase_per_step_rad": self.link.max_phase_per_step_rad,
                "spans": [
                    {
                        "length_km": s.length_km,
                        "d_ps_nm_km": s.d_ps_nm_km,
                        "slope_ps_nm2_km": s.slope_ps_nm2_km,
                        "attenuation_db_km": s.attenuation_db_km,
                        "gamma_per_w_km": s.gamma_per_w_km,
                        "lambda_ref_nm": s.lambda_ref_nm,
                    }
                    for s in self.link.spans
                ],
            },
            "channel_plan": {
                "frequencies_thz": list(self.channel_plan.frequencies_thz),
                "center_freq_thz": self.channel_plan.center_freq_thz,
                "band_sample_rate_ghz": self.channel_plan.band_sample_rate_ghz,
                "channel_sample_rate_ghz": self.channel_plan.channel_sample_rate_ghz,
            },
            "rates": {
                "code_rate": self.rates.code_rate,
                "pilot_ratio": str(self.rates.pilot_ratio),
                "ngmi_threshold": self.rates.ngmi_threshold,
            },
            "grid": {
                "n_grid": list(self.grid.n_grid),
                "nsc_grid": list(self.grid.nsc_grid),
                "rs_grid": [str(r) for r in self.grid.rs_grid],
                "power_grid_dbm": list(self.grid.power_grid_dbm),
                "alphabet": list(self.grid.alphabet.half_levels),
            },
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    def config_hash(self) -> str:
        """Stable provenance hash of the canonical JSON form.

        Excludes fields that cannot change results (output location,
        worker count) so reruns into different directories hash alike.
        """
        data = self.to_dict()
        data.pop("output_dir", None)
        data.pop("workers", None)
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _ctx(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config at {path}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a plain dict, reporting the offending path."""
    spans = tuple(
        _ctx(f"link.spans[{i}]", SpanSpec, **s)
        for i, s in enumerate(data["link"]["spans"])
    )
    link_kw = {k: v for k, v in data["link"].items() if k != "spans"}
    link = _ctx("link", LinkSpec, spans=spans, **link_kw)
    cp = data["channel_plan"]
    plan = _ctx(
        "channel_plan", ChannelPlan,
        frequencies_thz=tuple(cp["frequencies_thz"]),
        center_freq_thz=cp["center_freq_thz"],
        band_sample_rate_ghz=cp["band_sample_rate_ghz"],
        channel_sample_rate_ghz=cp["channel_sample_rate_ghz"],
    )
    rt = data["rates"]
    rates = _ctx(
        "rates", RateConfig,
        code_rate=rt["code_rate"],
        pilot_ratio=Fraction(rt["pilot_ratio"]),
        ngmi_threshold=rt["ngmi_threshold"],
    )
    gd = data["grid"]
    grid = _ctx(
        "grid", SearchGrid,
        n_grid=tuple(gd["n_grid"]),
        nsc_grid=tuple(gd["nsc_grid"]),
        rs_grid=tuple(Fraction(r) for r in gd["rs_grid"]),
        power_grid_dbm=tuple(gd["power_grid_dbm"]),
        alphabet=AmplitudeAlphabet(tuple(gd["alphabet"])),
    )
    return _ctx(
        "<root>", RunConfig,
        preset=data["preset"],
        link=link,
        channel_plan=plan,
        rates=rates,
        grid=grid,
        aggregate_gbd=data["aggregate_gbd"],
        total_power_dbm=data["total_power_dbm"],
        symbols_per_channel=data["symbols_per_channel"],
        seed=data.get("seed", 0),
        workers=data.get("workers", 1),
        output_dir=data.get("output_dir", "results"),
    )


def paper_scale(**overrides) -> RunConfig:
    """Full 37-channel C-band system at 78.8 GBd aggregate, 10 loops."""
    defaults = dict(
        preset="paper-scale",
        link=LinkSpec.paper(),
        channel_plan=ChannelPlan.paper(),
        rates=RateConfig(),
        grid=SearchGrid(),
        aggregate_gbd=PAPER_AGGREGATE_GBD,
        total_power_dbm=12.0,
        symbols_per_channel=12288,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


# Mini-link fiber data.  Symbol rate drops 4x from the full system, so the
# dispersion (and net-dispersion slope across the narrower channel grid)
# scales up 16x to preserve per-loop walk-off in symbol durations; the
# span-slope ratio of the full map is kept.  The reference wavelength sits
# at the lowest channel so, like the full map, the net dispersion crosses
# zero near one end of the band and grows across it (to ~1.3e4 ps/nm/loop
# at the far edge, i.e. 16x a few hundred ps/nm/loop in full-scale terms).
_MINI_LAMBDA_REF = 299792.458 / 192.95         # nm at channel 1 (192.95 THz)
_MINI_D_SSMF = 16.0 * 17.24
_MINI_D_NDF = -_MINI_D_SSMF / 6.0              # zero net dispersion at channel 1
_MINI_SLOPE_SCALE = 753.8                      # ~3200 ps/nm/loop per 25 GHz step
_MINI_S_SSMF = 0.092 * _MINI_SLOPE_SCALE
_MINI_S_NDF = -0.1026 * _MINI_SLOPE_SCALE


def _mini_spans() -> tuple[SpanSpec, ...]:
    ssmf = SpanSpec(40.3, _MINI_D_SSMF, _MINI_S_SSMF, 0.20, 1.3, _MINI_LAMBDA_REF)
    ndf = SpanSpec(40.3, _MINI_D_NDF, _MINI_S_NDF, 0.22, 1.7, _MINI_LAMBDA_REF)
    return tuple(ssmf if i == 3 else ndf for i in range(7))


def mini_link(**overrides) -> RunConfig:
    """Desk-scale 5-channel system: 19.7 GBd aggregate, 7 spans x 2 loops."""
    defaults = dict(
        preset="mini-link",
        link=LinkSpec(
            spans=_mini_spans(),
            num_loops=2,
            step_km=0.5,
            max_phase_per_step_rad=0.05,
        ),
        channel_plan=ChannelPlan.mini(),
        rates=RateConfig(),
        grid=SearchGrid(),
        aggregate_gbd=MINI_AGGREGATE_GBD,
        # 12 dBm total puts the mean nonlinear phase per loop (~3 rad over
        # the 7 spans) at the full-scale system's 12 dBm operating point.
        total_power_dbm=12.0,
        symbols_per_channel=12288,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


PRESETS = {"mini-link": mini_link, "paper-scale": paper_scale}
