"""Probabilistic amplitude shaping framer and net-data-rate accounting.

Shaped amplitude blocks are mapped four-per-PDM-symbol onto the real
dimensions (XI, XQ, YI, YQ).  Sign bits come from a seeded uniform source
standing in for information plus LDPC parity bits; no FEC is encoded or
decoded, the code only enters through its rate and its NGMI threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import AlignmentError, ConfigError, PayloadUnderflowError
from .shaping import AmplitudeAlphabet

__all__ = [
    "RateConfig",
    "PdmSymbolFrame",
    "DeframeResult",
    "frame",
    "deframe",
    "hard_decide_dims",
    "ndr_gbps",
    "frame_length_for",
]

DIM_ORDER = ("XI", "XQ", "YI", "YQ")


@dataclass(frozen=True)
class RateConfig:
    """FEC and pilot overheads entering the net-data-rate bookkeeping."""

    code_rate: float = 0.8
    pilot_ratio: Fraction = Fraction(47, 48)
    pdm_dims: int = 4
    ngmi_threshold: float = 0.861

    def __post_init__(self):
        if not 0 < self.code_rate <= 1:
            raise ConfigError("code rate must be in (0, 1]")
        if not 0 < self.pilot_ratio <= 1:
            raise ConfigError("pilot ratio must be in (0, 1]")

    @property
    def pilot_period(self) -> int:
        """One pilot every this many symbols (48 for ratio 47/48)."""
        gap = 1 - self.pilot_ratio
        if gap == 0:
            return 0
        period = Fraction(1, 1) / gap
        if period.denominator != 1:
            raise ConfigError("pilot ratio must be (p-1)/p for integer period p")
        return int(period)

    def check_pas_feasible(self, m: int):
        """Parity must fit on the sign bits: (1 - R_C) m <= 1."""
        if (1 - self.code_rate) * m > 1 + 1e-12:
            raise ConfigError(
                f"(1-Rc)*m = {(1 - self.code_rate) * m:.3f} > 1; parity does not fit"
            )


def ndr_gbps(
    rs_star: float,
    rates: RateConfig,
    m: int,
    r_sym_gbd: float,
    n_sc: int,
    qpsk: bool = False,
) -> float:
    """Net data rate alpha * {R_S* + [1 - m (1 - R_C)]} R_Sym N_SC R_Pi.

    QPSK is the m = 1, R_S = 0 corner of the same formula and evaluates to
    alpha R_C R_Sym N_SC R_Pi.
    """
    if qpsk:
        rs_star, m = 0.0, 1
    if rs_star < 0:
        raise ConfigError("shaping rate must be nonnegative")
    rates.check_pas_feasible(m)
    per_symbol = rates.pdm_dims * (rs_star + 1.0 - m * (1.0 - rates.code_rate))
    return per_symbol * r_sym_gbd * n_sc * float(rates.pilot_ratio)


def frame_length_for(num_data_symbols: int, pilot_period: int) -> int:
    """Total stream length once pilots are interleaved every ``period`` symbols."""
    if pilot_period == 0:
        return num_data_symbols
    num_pilots = math.ceil(num_data_symbols / (pilot_period - 1))
    total = num_data_symbols + num_pilots
    # Pilots sit at indices 0, period, 2*period, ...; adjust for the tail.
    while math.ceil(total / pilot_period) != num_pilots:
        num_pilots = math.ceil(total / pilot_period)
        total = num_data_symbols + num_pilots
    return total


@dataclass
class PdmSymbolFrame:
    """A pilot-interleaved stream of PDM symbols plus its build ledger."""

    dims: np.ndarray          # (L, 4) float, signed amplitude per real dimension
    pilot_mask: np.ndarray    # (L,) bool
    ledger: dict

    @property
    def num_symbols(self) -> int:
        return self.dims.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.dims[:, 0] + 1j * self.dims[:, 1]

    @property
    def y(self) -> np.ndarray:
        return self.dims[:, 2] + 1j * self.dims[:, 3]

    def data_dims(self) -> np.ndarray:
        return self.dims[~self.pilot_mask]

    def ledger_dict(self) -> dict:
        """JSON-ready copy of the ledger."""
        out = dict(self.ledger)
        out["indices"] = [int(i) for i in out["indices"]]
        out["sign_bits"] = np.asarray(out["sign_bits"], dtype=int).tolist()
        return out


def _bits_to_index(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def frame(
    codec,
    payload_bits: np.ndarray,
    num_blocks: int,
    rates: RateConfig,
    seed: int,
) -> PdmSymbolFrame:
    """Map payload bits through the codec into a pilot-interleaved PDM stream."""
    payload_bits = np.asarray(payload_bits, dtype=np.uint8).ravel()
    k, n = codec.k, codec.n
    if payload_bits.size < k * num_blocks:
        raise PayloadUnderflowError(
            f"need {k * num_blocks} payload bits, got {payload_bits.size}"
        )
    rates.check_pas_feasible(codec.alphabet.bits_per_quadrature)
    pad = (-n) % 4
    dims_per_block = (n + pad) // 4

    indices = []
    amp_rows = np.empty((num_blocks * dims_per_block, 4))
    for b in range(num_blocks):
        index = _bits_to_index(payload_bits[b * k : (b + 1) * k])
        indices.append(index)
        amps = list(codec.encode(index))
        if pad:
            amps.extend([1] * pad)  # filler amplitudes, dropped by deframe
        amp_rows[b * dims_per_block : (b + 1) * dims_per_block] = np.reshape(
            amps, (dims_per_block, 4)
        )

    period = rates.pilot_period
    num_data = amp_rows.shape[0]
    total = frame_length_for(num_data, period)
    positions = np.arange(total)
    pilot_mask = (positions % period == 0) if period else np.zeros(total, bool)

    rng = np.random.default_rng(seed)
    sign_bits = rng.integers(0, 2, size=(total, 4), dtype=np.uint8)
    signs = sign_bits.astype(float) * 2.0 - 1.0

    pilot_level = math.sqrt(codec.avg_energy_per_amplitude())
    dims = np.empty((total, 4))
    dims[~pilot_mask] = amp_rows[: int((~pilot_mask).sum())]
    dims[pilot_mask] = pilot_level
    dims *= signs

    ledger = {
        "codec": f"{codec.kind}:n={n}:k={k}",
        "kind": codec.kind,
        "n": n,
        "k": k,
        "pad": pad,
        "num_blocks": num_blocks,
        "seed": int(seed),
        "indices": indices,
        "sign_bits": sign_bits,
        "pilot_level": pilot_level,
        "half_levels": list(codec.alphabet.half_levels),
    }
    return PdmSymbolFrame(dims=dims, pilot_mask=pilot_mask, ledger=ledger)


def hard_decide_dims(values: np.ndarray, alphabet: AmplitudeAlphabet):
    """Minimum-distance decision to signed odd levels.

    Returns (amplitudes, sign_bits).  A value of exactly zero decides to
    +1: the tie resolves toward the positive sign for reproducibility.
    """
    values = np.asarray(values, dtype=float)
    levels = np.asarray(alphabet.half_levels, dtype=float)
    edges = 0.5 * (levels[1:] + levels[:-1])
    amp_idx = np.digitize(np.abs(values), edges)
    amps = levels[amp_idx]
    sign_bits = (values >= 0).astype(np.uint8)
    return amps.astype(int), sign_bits


@dataclass
class DeframeResult:
    """Receiver-side view of a frame after hard decisions."""

    hard_dims: np.ndarray       # (L, 4) signed decided levels
    amplitudes: np.ndarray      # (D, 4) decided data amplitudes
    sign_bits: np.ndarray       # (L, 4) decided sign bits (1 = positive)
    indices: list
    block_ok: np.ndarray        # per-block codeword-membership flag


def deframe(frm: PdmSymbolFrame, rx_dims: np.ndarray, codec) -> DeframeResult:
    """Invert ``frame`` on (possibly noisy) received symbols.

    Blocks whose decided amplitudes fall outside the codebook are flagged,
    not corrected; FEC success is modeled by the NGMI threshold elsewhere.
    """
    rx_dims = np.asarray(rx_dims, dtype=float)
    if rx_dims.shape != frm.dims.shape:
        raise AlignmentError(
            f"rx shape {rx_dims.shape} does not match frame {frm.dims.shape}"
        )
    alphabet = codec.alphabet
    amps, sign_bits = hard_decide_dims(rx_dims, alphabet)
    hard = amps * (sign_bits.astype(int) * 2 - 1)

    data_amps = amps[~frm.pilot_mask]
    pad = frm.ledger["pad"]
    n, num_blocks = frm.ledger["n"], frm.ledger["num_blocks"]
    dims_per_block = (n + pad) // 4
    flat = data_amps.reshape(num_blocks, dims_per_block * 4)
    indices = []
    ok = np.zeros(num_blocks, dtype=bool)
    for b in range(num_blocks):
        seq = tuple(int(a) for a in flat[b][: n])
        try:
            indices.append(codec.decode(seq))
            ok[b] = True
        except Exception:
            indices.append(None)
    return DeframeResult(
        hard_dims=hard.astype(float),
        amplitudes=data_amps,
        sign_bits=sign_bits,
        indices=indices,
        block_ok=ok,
    )
