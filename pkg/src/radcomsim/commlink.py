"""Communication use of the shared OFDM frame: equalization, demapping, BER."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import LinkObservation, channel_response, link_paths, synthesize_link
from .errors import DimensionMismatchError, InvalidParameterError, SingularEqualizerError
from .linkproc import ChannelEstimate
from .scene import AccessPoint, Scene
from .waveform import OfdmConfig, generate_frame, qpsk_demap

# Es/N0 - Eb/N0 for two bits per symbol.
QPSK_BITS_DB = 10.0 * math.log10(2.0)


@dataclass(frozen=True)
class BerResult:
    errors: int
    total: int
    rate: float
    snr_db: float | None = None
    equalizer: str | None = None


def equalize(Y: np.ndarray, H: np.ndarray, mode: str = "zf", noise_var: float = 0.0) -> np.ndarray:
    if mode == "zf":
        zero = np.argwhere(H == 0)
        if zero.size:
            raise SingularEqualizerError(zero[0])
        return Y / H
    if mode == "mmse":
        return np.conj(H) * Y / (np.abs(H) ** 2 + noise_var)
    raise InvalidParameterError(f"unknown equalizer {mode!r}")


def equalize_demodulate(obs: LinkObservation, channel, mode: str = "zf",
                        noise_var: float | None = None) -> np.ndarray:
    """Hard-decision bits in frame order (subcarriers first, then symbols).

    ``channel`` is a ``ChannelEstimate`` or a raw ``H`` array.
    """
    H = channel.H if isinstance(channel, ChannelEstimate) else np.asarray(channel)
    if H.shape != obs.Y.shape:
        raise DimensionMismatchError(f"channel {H.shape} vs observation {obs.Y.shape}")
    if noise_var is None:
        noise_var = obs.noise_var
    d_hat = equalize(obs.Y, H, mode, noise_var)
    return qpsk_demap(d_hat.T)


def measure_ber(received, reference, snr_db: float | None = None,
                equalizer: str | None = None) -> BerResult:
    rx = np.asarray(received, dtype=np.uint8).ravel()
    ref = np.asarray(reference, dtype=np.uint8).ravel()
    if rx.size != ref.size:
        raise DimensionMismatchError(f"{rx.size} received bits vs {ref.size} reference bits")
    errors = int(np.count_nonzero(rx != ref))
    rate = errors / rx.size if rx.size else 0.0
    return BerResult(errors, int(rx.size), rate, snr_db, equalizer)


def qpsk_ber_theory(ebn0_db: float) -> float:
    """Gray-mapped QPSK bit error probability ``Q(sqrt(2 Eb/N0))``."""
    if not math.isfinite(ebn0_db):
        raise InvalidParameterError("Eb/N0 must be finite")
    x = math.sqrt(2.0 * 10.0 ** (ebn0_db / 10.0))
    return float(0.5 * erfc(x / math.sqrt(2.0)))


def comm_scene(tx_position=(0.0, 0.0), ue_position=(3.0, 4.0), carrier: float = 26e9) -> Scene:
    """Single transmitter serving one user equipment over the line of sight."""
    return Scene((AccessPoint(0, tx_position, "transmitter", "SA1", carrier),),
                 (AccessPoint(1, ue_position, "receiver", "SA1", carrier),))


def ber_point(cfg: OfdmConfig, snr_db: float, min_bits: int, seed: int, mode: str = "zf",
              scene: Scene | None = None) -> tuple[int, BerResult]:
    """Monte Carlo BER at one per-symbol SNR, using the true line-of-sight channel.

    Returns ``(trials, result)``; trial ``i`` uses frame seed and noise seed
    derived from ``(seed, i)``.
    """
    scene = scene or comm_scene(carrier=cfg.carrier)
    paths, _ = link_paths(scene, (0, 0), cfg, direct_path=True)
    H = channel_response(paths, cfg)
    bits_per_frame = 2 * cfg.n_subcarriers * cfg.n_symbols
    trials = max(1, -(-int(min_bits) // bits_per_frame))
    errors = total = 0
    for i in range(trials):
        trial_seed = int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])
        frame = generate_frame(cfg, trial_seed)
        obs = synthesize_link(scene, frame, cfg, (0, 0), None, snr_db, trial_seed, direct_path=True)
        r = measure_ber(equalize_demodulate(obs, H, mode), frame.bits)
        errors += r.errors
        total += r.total
    return trials, BerResult(errors, total, errors / total, snr_db, mode)
