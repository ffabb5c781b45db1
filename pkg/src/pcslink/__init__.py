"""Finite-length probabilistic constellation shaping over dispersion-managed WDM.

Shaping codecs (enumerative sphere shaping and constant-composition
distribution matching) inside a probabilistic amplitude shaping framer,
a split-step Manakov fiber simulator with per-span amplification and gain
equalization, an idealized data-aided receiver with SNR/GMI/NGMI metrics,
and a per-channel joint (n, R_Sym) optimizer under an NGMI-threshold FEC
model, plus a CLI harness with desk-scale and full-scale presets.
"""

from .config import RunConfig, config_from_dict, mini_link, paper_scale
from .errors import (
    AlignmentError,
    ConfigError,
    InfeasibleRateError,
    IntegrationError,
    InvalidRateError,
    NotACodewordError,
    PayloadUnderflowError,
    PcslinkError,
)
from .fiber import LinkSpec, SpanSpec, dispersion_map, propagate
from .optimize import (
    ChannelContext,
    ChannelResult,
    SearchGrid,
    optimize_channel,
    rate_search,
    sweep_fig3,
    system_total,
)
from .pas import RateConfig, deframe, frame, ndr_gbps
from .rxdsp import MetricsReport, cdc, equalize_and_decide, extract_channel, gmi_ngmi
from .shaping import (
    ALPHABET_16QAM,
    ALPHABET_64QAM,
    ALPHABET_QPSK,
    AmplitudeAlphabet,
    ShapingConfig,
    fit_mb,
    make_codec,
    shaping_gap_db,
)
from .simulate import ModulationFormat, WdmSimulation, b2b_run
from .waveform import ChannelPlan, SampledField, SubcarrierPlan

__version__ = "0.1.0"
