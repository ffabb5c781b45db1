"""Finite-length amplitude shaping codecs and Maxwell-Boltzmann references.

Two fixed-length distribution matchers are provided:

* an energy-bounded enumerative codec (``EssCodec``) that indexes, in
  lexicographic order, every amplitude sequence whose block energy stays
  below a bound, and
* a constant-composition codec (``CcdmCodec``) that indexes permutations
  of a fixed amplitude multiset by exact multiset-rank arithmetic.

All counting uses Python's arbitrary-precision integers; codebook sizes at
block length 1280 exceed 10^300 and would overflow any fixed-width type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InfeasibleRateError, InvalidRateError, NotACodewordError

__all__ = [
    "AmplitudeAlphabet",
    "ShapingConfig",
    "MbDistribution",
    "fit_mb",
    "EssTrellis",
    "EssCodec",
    "ess_build",
    "CcdmComposition",
    "CcdmCodec",
    "ccdm_select_composition",
    "make_codec",
    "shaping_gap_db",
    "ALPHABET_16QAM",
    "ALPHABET_64QAM",
    "ALPHABET_QPSK",
]


@dataclass(frozen=True)
class AmplitudeAlphabet:
    """Positive odd amplitude levels of one quadrature of a square QAM."""

    half_levels: tuple[int, ...]

    def __post_init__(self):
        levels = self.half_levels
        if len(levels) < 1:
            raise InvalidRateError("alphabet must contain at least one level")
        if levels[0] != 1:
            raise InvalidRateError("first amplitude level must be 1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidRateError("amplitude levels must be strictly increasing")
        if any(a % 2 == 0 for a in levels):
            raise InvalidRateError("amplitude levels must be odd")
        m = len(levels)
        if m & (m - 1):
            raise InvalidRateError("number of amplitude levels must be a power of two")

    @property
    def num_amplitudes(self) -> int:
        return len(self.half_levels)

    @property
    def levels_per_quadrature(self) -> int:
        """Signed level count per quadrature (M of an M^2-ary QAM)."""
        return 2 * len(self.half_levels)

    @property
    def bits_per_quadrature(self) -> int:
        """m = log2 M, one sign bit plus the amplitude bits."""
        return 1 + (len(self.half_levels) - 1).bit_length()

    @property
    def max_rate_bits(self) -> float:
        """Entropy of uniform amplitudes, the ceiling for any shaping rate."""
        return math.log2(len(self.half_levels))

    @property
    def energies(self) -> tuple[int, ...]:
        return tuple(a * a for a in self.half_levels)


ALPHABET_QPSK = AmplitudeAlphabet((1,))
ALPHABET_16QAM = AmplitudeAlphabet((1, 3))
ALPHABET_64QAM = AmplitudeAlphabet((1, 3, 5, 7))


@dataclass(frozen=True)
class ShapingConfig:
    """Block length, rate and codec family of one shaping codec.

    The rate is held as an exact rational so that ``k = floor(n * rate)``
    never depends on floating-point rounding.
    """

    n: int
    rate: Fraction
    alphabet: AmplitudeAlphabet = ALPHABET_16QAM
    kind: str = "ess"  # "ess" | "ccdm"

    def __post_init__(self):
        if self.kind not in ("ess", "ccdm"):
            raise InvalidRateError(f"unknown codec kind {self.kind!r}")
        if self.n < 1:
            raise InvalidRateError("block length must be positive")
        rate = Fraction(self.rate)
        object.__setattr__(self, "rate", rate)
        if rate <= 0 or float(rate) > self.alphabet.max_rate_bits + 1e-12:
            raise InvalidRateError(
                f"rate {rate} outside (0, {self.alphabet.max_rate_bits}]"
            )

    @property
    def k(self) -> int:
        """Input bits per block, floor(n * rate) in exact arithmetic."""
        return int(self.n * self.rate)


@dataclass(frozen=True)
class MbDistribution:
    """Maxwell-Boltzmann amplitude distribution p_a ~ exp(-lambda a^2)."""

    alphabet: AmplitudeAlphabet
    probabilities: tuple[float, ...]
    lam: float
    entropy_bits: float
    avg_energy: float


def _mb_probs(alphabet: AmplitudeAlphabet, lam: float) -> np.ndarray:
    e = np.asarray(alphabet.energies, dtype=float)
    w = np.exp(-lam * (e - e[0]))  # shift exponent to avoid underflow
    return w / w.sum()


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def fit_mb(alphabet: AmplitudeAlphabet, rate_bits: float) -> MbDistribution:
    """Fit the minimum-energy distribution with the given entropy.

    Bisection on the shaping parameter; the entropy is continuous and
    strictly decreasing in lambda, so the solution is unique.  The fit is
    tightened until the entropy matches to well below 1e-9 bits.
    """
    max_rate = alphabet.max_rate_bits
    if not 0 < rate_bits <= max_rate + 1e-12:
        raise InvalidRateError(f"rate {rate_bits} outside (0, {max_rate}]")
    if abs(rate_bits - max_rate) <= 1e-15:
        p = _mb_probs(alphabet, 0.0)
        return MbDistribution(
            alphabet,
            tuple(p.tolist()),
            0.0,
            _entropy_bits(p),
            float(p @ np.asarray(alphabet.energies, dtype=float)),
        )
    lo, hi = 0.0, 1.0
    while _entropy_bits(_mb_probs(alphabet, hi)) > rate_bits:
        hi *= 2.0
        if hi > 1e9:  # pragma: no cover - degenerate numerical input
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _entropy_bits(_mb_probs(alphabet, mid)) > rate_bits:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    p = _mb_probs(alphabet, lam)
    return MbDistribution(
        alphabet,
        tuple(p.tolist()),
        lam,
        _entropy_bits(p),
        float(p @ np.asarray(alphabet.energies, dtype=float)),
    )


# ---------------------------------------------------------------------------
# Energy-bounded enumerative codec
# ---------------------------------------------------------------------------

def _energy_offsets(alphabet: AmplitudeAlphabet) -> tuple[int, ...]:
    # Odd squares are 1 mod 8, so block energies of i amplitudes live on the
    # lattice i + 8Z; store trellis columns indexed by the lattice step.
    return tuple((a * a - 1) // 8 for a in alphabet.half_levels)


@dataclass
class EssTrellis:
    """Suffix-count table of the energy-bounded codebook.

    ``counts[i][t]`` is the number of length ``n - i`` suffixes whose energy
    does not exceed ``e_max - i - 8 t``; ``energy_sums[i][t]`` is the summed
    energy of those suffixes.  Both are exact integers.
    """

    n: int
    alphabet: AmplitudeAlphabet
    e_max: int
    k: int
    counts: list[list[int]]
    energy_sums: list[list[int]]

    @property
    def num_sequences(self) -> int:
        """Total sequences within the energy bound (may exceed 2^k)."""
        return self.counts[0][0]


def _build_tables(n: int, alphabet: AmplitudeAlphabet, e_max: int):
    offs = _energy_offsets(alphabet)
    energies = alphabet.energies
    counts: list[list[int]] = [[] for _ in range(n + 1)]
    sums: list[list[int]] = [[] for _ in range(n + 1)]
    width = (e_max - n) // 8 + 1
    counts[n] = [1] * width
    sums[n] = [0] * width
    for i in range(n - 1, -1, -1):
        width_i = (e_max - i) // 8 + 1
        nxt_c = counts[i + 1]
        nxt_s = sums[i + 1]
        limit = len(nxt_c)
        row_c = [0] * width_i
        row_s = [0] * width_i
        for t in range(width_i):
            c = 0
            s = 0
            for off, en in zip(offs, energies):
                tt = t + off
                if tt < limit:
                    cc = nxt_c[tt]
                    c += cc
                    s += cc * en + nxt_s[tt]
            row_c[t] = c
            row_s[t] = s
        counts[i] = row_c
        sums[i] = row_s
    return counts, sums


def ess_build(config: ShapingConfig) -> EssTrellis:
    """Build the trellis at the smallest energy bound holding 2^k sequences."""
    if config.kind != "ess":
        raise InvalidRateError("ess_build requires an ESS config")
    n, k = config.n, config.k
    alphabet = config.alphabet
    num = alphabet.num_amplitudes
    target = 1 << k
    if num ** n < target:
        raise InfeasibleRateError(
            f"2^{k} exceeds the {num}^{n} length-{n} sequences"
        )
    # Exact count of sequences per energy via iterated convolution on the
    # energy lattice, then pick the smallest bound reaching the target.
    offs = _energy_offsets(alphabet)
    dist = [1]
    for _ in range(n):
        new = [0] * (len(dist) + offs[-1])
        for t, c in enumerate(dist):
            if c:
                for off in offs:
                    new[t + off] += c
        dist = new
    running = 0
    t_star = None
    for t, c in enumerate(dist):
        running += c
        if running >= target:
            t_star = t
            break
    assert t_star is not None
    e_max = n + 8 * t_star
    counts, sums = _build_tables(n, alphabet, e_max)
    return EssTrellis(n, alphabet, e_max, k, counts, sums)


class EssCodec:
    """Lexicographic indexing of the energy-bounded codebook."""

    kind = "ess"

    def __init__(self, config: ShapingConfig, trellis: EssTrellis | None = None):
        self.config = config
        self.trellis = trellis if trellis is not None else ess_build(config)
        self._offs = _energy_offsets(config.alphabet)

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def alphabet(self) -> AmplitudeAlphabet:
        return self.config.alphabet

    @property
    def e_max(self) -> int:
        return self.trellis.e_max

    def encode(self, index: int) -> tuple[int, ...]:
        """Return the sequence of lexicographic rank ``index``."""
        if not 0 <= index < (1 << self.k):
            raise NotACodewordError(f"index {index} out of range for k={self.k}")
        tr = self.trellis
        levels = self.alphabet.half_levels
        seq = []
        t = 0
        r = index
        for i in range(self.n):
            nxt = tr.counts[i + 1]
            limit = len(nxt)
            for a, off in zip(levels, self._offs):
                tt = t + off
                c = nxt[tt] if tt < limit else 0
                if r < c:
                    seq.append(a)
                    t = tt
                    break
                r -= c
            else:  # pragma: no cover - trellis guarantees a branch exists
                raise NotACodewordError("trellis walk exhausted")
        return tuple(seq)

    def decode(self, seq: Sequence[int]) -> int:
        """Return the lexicographic rank of ``seq``; reject non-codewords."""
        if len(seq) != self.n:
            raise NotACodewordError(f"sequence length {len(seq)} != n={self.n}")
        tr = self.trellis
        levels = self.alphabet.half_levels
        pos = {a: j for j, a in enumerate(levels)}
        rank = 0
        t = 0
        for i, a in enumerate(seq):
            j = pos.get(a)
            if j is None:
                raise NotACodewordError(f"amplitude {a} not in alphabet")
            nxt = tr.counts[i + 1]
            limit = len(nxt)
            for off in self._offs[:j]:
                tt = t + off
                if tt < limit:
                    rank += nxt[tt]
            t += self._offs[j]
            if t >= limit:
                raise NotACodewordError("block energy exceeds the bound")
        if rank >= (1 << self.k):
            raise NotACodewordError(f"rank {rank} beyond the 2^{self.k} used codewords")
        return rank

    def energy_sum(self, used_only: bool = True) -> int:
        """Exact summed block energy, by DP over the suffix tables.

        With ``used_only`` the sum runs over the 2^k codewords of rank
        0..2^k-1; otherwise over every sequence within the energy bound.
        The used-codeword sum walks the boundary codeword of rank 2^k - 1
        and accumulates the counted prefix branches, so no enumeration of
        the codebook is needed.
        """
        tr = self.trellis
        if not used_only or (1 << self.k) == tr.num_sequences:
            return tr.energy_sums[0][0]
        boundary = self.encode((1 << self.k) - 1)
        levels = self.alphabet.half_levels
        pos = {a: j for j, a in enumerate(levels)}
        total = 0
        prefix_energy = 0
        t = 0
        for i, a in enumerate(boundary):
            nxt_c = tr.counts[i + 1]
            nxt_s = tr.energy_sums[i + 1]
            limit = len(nxt_c)
            j = pos[a]
            for b, off in zip(levels[:j], self._offs[:j]):
                tt = t + off
                if tt < limit:
                    total += nxt_c[tt] * (prefix_energy + b * b) + nxt_s[tt]
            prefix_energy += a * a
            t += self._offs[j]
        total += prefix_energy  # the boundary codeword itself
        return total

    def avg_energy_per_amplitude(self, used_only: bool = True) -> float:
        count = (1 << self.k) if used_only else self.trellis.num_sequences
        return self.energy_sum(used_only) / count / self.n

    def amplitude_probabilities(self) -> np.ndarray:
        """Empirical per-amplitude marginal over the used codewords.

        Estimated by sampling; only used as a decoding prior, where small
        estimation error is harmless.
        """
        import random as _random

        take = min(1 << self.k, 2048)
        if (1 << self.k) <= take:
            idx = range(1 << self.k)
        else:
            rng = _random.Random(0x5E5)
            idx = [rng.getrandbits(self.k) for _ in range(take)]
        hist = np.zeros(self.alphabet.num_amplitudes)
        pos = {a: j for j, a in enumerate(self.alphabet.half_levels)}
        for i in idx:
            for a in self.encode(int(i)):
                hist[pos[a]] += 1
        return hist / hist.sum()


# ---------------------------------------------------------------------------
# Constant-composition codec
# ---------------------------------------------------------------------------

def _multinomial(counts: Sequence[int]) -> int:
    total = math.factorial(sum(counts))
    for c in counts:
        total //= math.factorial(c)
    return total


@dataclass(frozen=True)
class CcdmComposition:
    """Fixed amplitude multiset of a constant-composition codec."""

    alphabet: AmplitudeAlphabet
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != self.alphabet.num_amplitudes:
            raise InvalidRateError("composition length must match the alphabet")
        if any(c < 0 for c in self.counts):
            raise InvalidRateError("composition counts must be nonnegative")

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def multinomial(self) -> int:
        return _multinomial(self.counts)

    @property
    def k(self) -> int:
        """floor(log2 multinomial): addressable input bits."""
        return self.multinomial.bit_length() - 1

    @property
    def block_energy(self) -> int:
        return sum(c * a * a for c, a in zip(self.counts, self.alphabet.half_levels))

    def avg_energy_per_amplitude(self) -> float:
        return self.block_energy / self.n


def _best_composition(alphabet: AmplitudeAlphabet, n: int, rate: Fraction):
    """MB quantization plus greedy repair; returns the composition or None.

    Largest-remainder rounding of n * p_MB, then single-symbol moves that
    grow the multinomial until the rate constraint holds, then moves that
    shed energy while keeping it.  Returns None when even the multinomial-
    maximizing neighborhood cannot reach floor(n * rate) bits.
    """
    k_req = int(n * rate)
    mb = fit_mb(alphabet, float(rate))
    ideal = np.asarray(mb.probabilities) * n
    base = np.floor(ideal).astype(int)
    rem = ideal - base
    short = n - int(base.sum())
    for j in np.argsort(-rem)[:short]:
        base[j] += 1
    counts = base.tolist()
    num = len(counts)

    def moves(cur):
        for i in range(num):
            if cur[i] == 0:
                continue
            for j in range(num):
                if i == j:
                    continue
                cand = list(cur)
                cand[i] -= 1
                cand[j] += 1
                yield cand

    # Repair phase: climb toward the balanced (max-multinomial) composition.
    while _multinomial(counts).bit_length() - 1 < k_req:
        best = max(moves(counts), key=_multinomial, default=None)
        if best is None or _multinomial(best) <= _multinomial(counts):
            return None
        counts = best

    # Energy phase: trade entropy margin for lower average energy.
    energies = alphabet.energies
    improved = True
    while improved:
        improved = False
        candidates = [
            c for c in moves(counts)
            if sum(x * e for x, e in zip(c, energies)) < sum(x * e for x, e in zip(counts, energies))
            and _multinomial(c).bit_length() - 1 >= k_req
        ]
        if candidates:
            counts = min(candidates, key=lambda c: sum(x * e for x, e in zip(c, energies)))
            improved = True
    return CcdmComposition(alphabet, tuple(counts))


def ccdm_select_composition(
    alphabet: AmplitudeAlphabet, n: int, rate: Fraction
) -> CcdmComposition:
    """Pick the transmit composition for block length n and rate bits/amplitude."""
    rate = Fraction(rate)
    if rate <= 0 or float(rate) > alphabet.max_rate_bits + 1e-12:
        raise InvalidRateError(f"rate {rate} outside (0, {alphabet.max_rate_bits}]")
    comp = _best_composition(alphabet, n, rate)
    if comp is None:
        raise InfeasibleRateError(
            f"no length-{n} composition reaches floor(n*rate)={int(n * rate)} bits"
        )
    return comp


class CcdmCodec:
    """Exact multiset-rank indexing of constant-composition sequences."""

    kind = "ccdm"

    def __init__(self, config: ShapingConfig, composition: CcdmComposition | None = None):
        self.config = config
        self.composition = (
            composition
            if composition is not None
            else ccdm_select_composition(config.alphabet, config.n, config.rate)
        )
        if self.composition.n != config.n:
            raise InvalidRateError("composition does not sum to the block length")

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def k(self) -> int:
        return self.composition.k

    @property
    def alphabet(self) -> AmplitudeAlphabet:
        return self.config.alphabet

    def encode(self, index: int) -> tuple[int, ...]:
        """Return the multiset permutation of lexicographic rank ``index``."""
        if not 0 <= index < (1 << self.k):
            raise NotACodewordError(f"index {index} out of range for k={self.k}")
        remaining = list(self.composition.counts)
        levels = self.alphabet.half_levels
        total = self.composition.multinomial
        left = self.n
        r = index
        seq = []
        for _ in range(self.n):
            for j, a in enumerate(levels):
                if remaining[j] == 0:
                    continue
                c = total * remaining[j] // left
                if r < c:
                    seq.append(a)
                    total = c
                    remaining[j] -= 1
                    left -= 1
                    break
                r -= c
            else:  # pragma: no cover
                raise NotACodewordError("multiset walk exhausted")
        return tuple(seq)

    def rank(self, seq: Sequence[int]) -> int:
        """Lexicographic rank among all permutations of the multiset."""
        return self._rank(seq, strict=False)

    def decode(self, seq: Sequence[int]) -> int:
        """Rank a sequence; reject wrong compositions and out-of-range ranks."""
        return self._rank(seq, strict=True)

    def _rank(self, seq: Sequence[int], strict: bool) -> int:
        if len(seq) != self.n:
            raise NotACodewordError(f"sequence length {len(seq)} != n={self.n}")
        levels = self.alphabet.half_levels
        pos = {a: j for j, a in enumerate(levels)}
        observed = [0] * len(levels)
        for a in seq:
            j = pos.get(a)
            if j is None:
                raise NotACodewordError(f"amplitude {a} not in alphabet")
            observed[j] += 1
        if tuple(observed) != self.composition.counts:
            raise NotACodewordError("sequence composition does not match the codec")
        remaining = list(self.composition.counts)
        total = self.composition.multinomial
        left = self.n
        rank = 0
        for a in seq:
            j = pos[a]
            for jj in range(j):
                if remaining[jj]:
                    rank += total * remaining[jj] // left
            total = total * remaining[j] // left
            remaining[j] -= 1
            left -= 1
        if strict and rank >= (1 << self.k):
            raise NotACodewordError(f"rank {rank} beyond the 2^{self.k} used codewords")
        return rank

    def avg_energy_per_amplitude(self) -> float:
        # Every codeword shares the composition, hence the same energy.
        return self.composition.avg_energy_per_amplitude()

    def amplitude_probabilities(self) -> np.ndarray:
        return np.asarray(self.composition.counts, dtype=float) / self.n


def make_codec(config: ShapingConfig):
    """Instantiate the codec named by the config."""
    if config.kind == "ess":
        return EssCodec(config)
    return CcdmCodec(config)


def shaping_gap_db(config: ShapingConfig, used_only: bool = True) -> float:
    """Energy penalty in dB versus the MB reference at the operational rate.

    The reference rate is k/n, the bits the finite-length codec actually
    carries, not the asymptotic rate it was configured with.
    """
    codec = make_codec(config)
    if config.kind == "ess":
        avg = codec.avg_energy_per_amplitude(used_only)
    else:
        avg = codec.avg_energy_per_amplitude()
    k = codec.k
    if k <= 0:
        raise InfeasibleRateError("codec carries no bits; gap undefined")
    mb = fit_mb(config.alphabet, k / config.n)
    return 10.0 * math.log10(avg / mb.avg_energy)
