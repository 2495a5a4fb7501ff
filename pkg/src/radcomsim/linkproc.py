"""Per-link receiver processing: LS channel estimates and range-Doppler maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import SPEED_OF_LIGHT
from .channel import LinkObservation
from .errors import DimensionMismatchError, InvalidParameterError
from .waveform import OfdmConfig, OfdmFrame


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    tx_id: int
    rx_id: int
    H: np.ndarray


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    """Magnitudes indexed ``[delay_bin, doppler_bin]``.

    Doppler bins at or above ``M/2`` stand for negative frequencies.
    """

    magnitude: np.ndarray
    delay_bin: float
    doppler_bin: float
    tx_id: int | None = None
    rx_id: int | None = None

    @property
    def range_bin(self) -> float:
        """Bistatic range per delay bin, ``c / B``."""
        return SPEED_OF_LIGHT * self.delay_bin

    def doppler_of(self, m: int) -> float:
        M = self.magnitude.shape[1]
        return (m - M if m >= M / 2 else m) * self.doppler_bin


@dataclass(frozen=True)
class Peak:
    delay: float
    doppler: float
    magnitude: float
    delay_index: int
    doppler_index: int


def estimate_channel_ls(obs: LinkObservation, frame: OfdmFrame) -> ChannelEstimate:
    """Least-squares estimate ``H = Y / d``."""
    if obs.Y.shape != frame.shape:
        raise DimensionMismatchError(f"observation {obs.Y.shape} vs frame {frame.shape}")
    if np.any(frame.symbols == 0):
        raise InvalidParameterError("frame contains zero symbols")
    H = obs.Y / frame.symbols
    H.setflags(write=False)
    return ChannelEstimate(obs.tx_id, obs.rx_id, H)


def range_doppler_map(est: ChannelEstimate, cfg: OfdmConfig, window: bool = False) -> RangeDopplerMap:
    """Unitary IDFT over subcarriers, then unitary DFT over symbols, magnitude taken.

    ``window=True`` applies a separable Hann taper first.
    """
    H = np.asarray(est.H)
    if H.shape != cfg.shape:
        raise DimensionMismatchError(f"estimate {H.shape} vs config {cfg.shape}")
    if window:
        H = H * np.outer(np.hanning(H.shape[0]), np.hanning(H.shape[1]))
    profile = np.fft.ifft(H, axis=0, norm="ortho")
    rd = np.fft.fft(profile, axis=1, norm="ortho")
    M = cfg.n_symbols
    return RangeDopplerMap(np.abs(rd), 1.0 / cfg.bandwidth, 1.0 / (M * cfg.symbol_duration),
                           est.tx_id, est.rx_id)


def extract_peaks(rd: RangeDopplerMap, max_count: int = 1, threshold_db: float = 20.0) -> list[Peak]:
    """Local maxima (8-neighbourhood, cyclic) within ``threshold_db`` of the global peak.

    Sorted by magnitude, ties going to the lower delay bin then the lower
    Doppler bin.
    """
    if max_count < 1:
        raise InvalidParameterError("max_count must be >= 1")
    A = rd.magnitude
    top = A.max() if A.size else 0.0
    if not top > 0:
        return []
    is_max = A > 0
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= A >= np.roll(A, (di, dj), axis=(0, 1))
    is_max &= A >= top * 10.0 ** (-threshold_db / 20.0)
    ii, jj = np.nonzero(is_max)
    order = sorted(zip(ii, jj), key=lambda ij: (-A[ij], ij[0], ij[1]))
    return [Peak(i * rd.delay_bin, rd.doppler_of(j), float(A[i, j]), int(i), int(j))
            for i, j in order[:max_count]]
