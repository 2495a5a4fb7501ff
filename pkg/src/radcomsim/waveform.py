"""OFDM frame shared by the radar and communication functions.

Bits come from numpy's PCG64 generator seeded through ``SeedSequence``,
which produces the same stream on every platform. QPSK uses the Gray map

    (b0, b1) -> ((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2)

so the in-phase sign carries b0 and the quadrature sign carries b1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import SPEED_OF_LIGHT
from .errors import DimensionMismatchError, InvalidParameterError, UndefinedPaprError

_FRAME_STREAM = 0x0F0A


@dataclass(frozen=True)
class OfdmConfig:
    carrier: float = 26e9
    bandwidth: float = 400e6
    n_subcarriers: int = 32
    n_symbols: int = 64
    cp_fraction: float = 0.25
    modulation: str = "qpsk"

    def __post_init__(self):
        N = self.n_subcarriers
        if not (isinstance(N, (int, np.integer)) and N >= 2 and (N & (N - 1)) == 0):
            raise InvalidParameterError(f"n_subcarriers must be a power of two >= 2, got {N}")
        if not (isinstance(self.n_symbols, (int, np.integer)) and self.n_symbols >= 1):
            raise InvalidParameterError(f"n_symbols must be >= 1, got {self.n_symbols}")
        if not (0.0 <= self.cp_fraction < 1.0):
            raise InvalidParameterError(f"cp_fraction must lie in [0, 1), got {self.cp_fraction}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InvalidParameterError(f"bandwidth must be positive, got {self.bandwidth}")
        if not (self.carrier > self.bandwidth and math.isfinite(self.carrier)):
            raise InvalidParameterError("carrier must exceed the bandwidth")
        if self.modulation != "qpsk":
            raise InvalidParameterError(f"unsupported modulation {self.modulation!r}")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier

    @property
    def cp_length(self) -> int:
        """Cyclic-prefix samples per symbol, ``round(N * cp_fraction)``."""
        return int(round(self.n_subcarriers * self.cp_fraction))

    @property
    def symbol_duration(self) -> float:
        """OFDM symbol period including the cyclic prefix."""
        return (1.0 + self.cp_fraction) * self.n_subcarriers / self.bandwidth

    @property
    def cp_duration(self) -> float:
        return self.cp_fraction * self.n_subcarriers / self.bandwidth

    @property
    def max_delay(self) -> float:
        """Unambiguous delay window ``1 / subcarrier_spacing``."""
        return 1.0 / self.subcarrier_spacing

    @property
    def frequencies(self) -> np.ndarray:
        """Absolute frequency of each subcarrier, ``f_c + k * df``."""
        return self.carrier + np.arange(self.n_subcarriers) * self.subcarrier_spacing

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_subcarriers, self.n_symbols)


@dataclass(frozen=True, eq=False)
class OfdmFrame:
    """Frequency-domain symbols ``d[k, n]`` (subcarrier k, symbol n)."""

    symbols: np.ndarray
    bits: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex)
        if s.ndim != 2:
            raise DimensionMismatchError(f"symbols must be 2-D (N x M), got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)
        if self.bits is not None:
            b = np.asarray(self.bits, dtype=np.uint8)
            b.setflags(write=False)
            object.__setattr__(self, "bits", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.symbols.shape


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Per-symbol time samples, shape ``(M, cp_length + N)``, CP first."""

    samples: np.ndarray
    sample_rate: float
    cp_length: int

    @property
    def body(self) -> np.ndarray:
        """Samples with the cyclic prefix removed."""
        return self.samples[:, self.cp_length:]


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int8).reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / math.sqrt(2.0)


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    s = np.asarray(symbols).ravel()
    out = np.empty((s.size, 2), dtype=np.uint8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.ravel()


def frame_from_bits(bits: np.ndarray, cfg: OfdmConfig, seed: int | None = None) -> OfdmFrame:
    """Map ``2*N*M`` bits to a frame; bit pairs fill subcarriers first, then symbols."""
    N, M = cfg.shape
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != 2 * N * M:
        raise DimensionMismatchError(f"expected {2 * N * M} bits, got {bits.size}")
    d = qpsk_map(bits).reshape(M, N).T
    return OfdmFrame(d, bits, seed)


def generate_frame(cfg: OfdmConfig, seed: int) -> OfdmFrame:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _FRAME_STREAM])))
    N, M = cfg.shape
    bits = rng.integers(0, 2, size=2 * N * M, dtype=np.uint8)
    return frame_from_bits(bits, cfg, seed)


def modulate(frame: OfdmFrame, cfg: OfdmConfig) -> TimeSignal:
    """Unitary inverse DFT per symbol with the cyclic prefix prepended."""
    N = cfg.n_subcarriers
    if frame.shape[0] != N:
        raise DimensionMismatchError(f"frame has {frame.shape[0]} subcarriers, config has {N}")
    body = np.fft.ifft(frame.symbols, axis=0, norm="ortho").T
    cp = cfg.cp_length
    samples = np.concatenate([body[:, N - cp:], body], axis=1) if cp else body
    return TimeSignal(samples, cfg.bandwidth, cp)


def papr_db(signal: TimeSignal, per_symbol: bool = False):
    """Peak-to-average power ratio in dB with CP samples excluded.

    With ``per_symbol=True`` an array with one value per OFDM symbol is
    returned instead of the whole-signal figure.
    """
    p = np.abs(signal.body) ** 2
    if p.size == 0:
        raise UndefinedPaprError("empty signal")
    if per_symbol:
        mean = p.mean(axis=1)
        if np.any(mean == 0):
            raise UndefinedPaprError("all-zero OFDM symbol")
        return 10.0 * np.log10(p.max(axis=1) / mean)
    mean = p.mean()
    if mean == 0:
        raise UndefinedPaprError("all-zero signal")
    return float(10.0 * np.log10(p.max() / mean))


def range_resolution(bandwidth: float) -> float:
    """Two-way range resolution ``c / (2 B)`` in meters."""
    if not bandwidth > 0:
        raise InvalidParameterError("bandwidth must be positive")
    return SPEED_OF_LIGHT / (2.0 * bandwidth)
