"""Frequency-domain observations of the bistatic links.

The model works on post-CP-removal OFDM symbols: every path contributes a
per-subcarrier phase ramp for its delay and a per-symbol phase progression
for its Doppler shift, so no inter-symbol interference is synthesized.
Synthesis refuses geometries where that shortcut is invalid (path delay
beyond ``1/df``, or delay spread within a link beyond the cyclic prefix).

Per-link randomness (RCS draws, noise) comes from a generator seeded with
``SeedSequence([seed, 0x11A4, tx_id, rx_id])`` so results never depend on
the order in which links are processed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import SPEED_OF_LIGHT
from .clocksync import ClockState
from .errors import (AmbiguousDelayError, DimensionMismatchError, InvalidParameterError,
                     SingularGeometryError)
from .scene import Scatterer, Scene
from .waveform import OfdmConfig, OfdmFrame

_LINK_STREAM = 0x11A4
_CLUTTER_STREAM = 0xC177


@dataclass(frozen=True, eq=False)
class LinkObservation:
    tx_id: int
    rx_id: int
    Y: np.ndarray
    snr_db: float | None
    noise_var: float
    seed: int | None


@dataclass(frozen=True)
class Path:
    """One propagation path of a link."""

    amplitude: complex
    delay: float
    doppler: float = 0.0


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def bistatic_range(tx, rx, target) -> float:
    """Path length transmitter -> target -> receiver in meters."""
    return _dist(target, tx) + _dist(target, rx)


def bistatic_doppler(tx, rx, target, velocity, carrier: float) -> float:
    """Doppler shift in Hz; positive when the range sum is shrinking."""
    d_tx = _dist(target, tx)
    d_rx = _dist(target, rx)
    if d_tx == 0.0 or d_rx == 0.0:
        raise SingularGeometryError("target coincides with a transmitter or receiver")
    ux = (target[0] - tx[0]) / d_tx + (target[0] - rx[0]) / d_rx
    uy = (target[1] - tx[1]) / d_tx + (target[1] - rx[1]) / d_rx
    return -(carrier / SPEED_OF_LIGHT) * (ux * velocity[0] + uy * velocity[1])


def bistatic_direction(tx, rx, target) -> np.ndarray:
    """Sum of unit vectors from transmitter and receiver toward the target."""
    t = np.asarray(target, dtype=float)
    a = t - np.asarray(tx, dtype=float)
    b = t - np.asarray(rx, dtype=float)
    na, nb = np.hypot(*a), np.hypot(*b)
    if na == 0.0 or nb == 0.0:
        raise SingularGeometryError("target coincides with a transmitter or receiver")
    return a / na + b / nb


def link_rng(seed: int, tx_id: int, rx_id: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([int(seed), _LINK_STREAM, int(tx_id), int(rx_id)])))


def link_paths(scene: Scene, link: tuple[int, int], cfg: OfdmConfig,
               rng: np.random.Generator | None = None,
               direct_path: bool = False) -> tuple[list[Path], float]:
    """Paths of link ``(p, q)`` and the reference power used for the SNR.

    The reference power is that of the strongest target; without targets,
    the strongest remaining path; with no paths at all, 1.
    """
    p, q = link
    tx = scene.transmitters[p].position
    rx = scene.receivers[q].position
    paths = []
    target_power = 0.0
    for t in scene.targets:
        if t.reflectivity == "rcs-random":
            if rng is None:
                raise InvalidParameterError("rcs-random targets need a link generator")
            z = rng.standard_normal(2)
            amp = abs(t.amplitude) * complex(z[0], z[1]) / math.sqrt(2.0)
        else:
            amp = t.amplitude
        fd = bistatic_doppler(tx, rx, t.position, t.velocity, cfg.carrier)
        paths.append(Path(amp, bistatic_range(tx, rx, t.position) / SPEED_OF_LIGHT, fd))
        target_power = max(target_power, abs(amp) ** 2)
    for s in scene.clutter:
        paths.append(Path(s.amplitude, bistatic_range(tx, rx, s.position) / SPEED_OF_LIGHT))
    if direct_path:
        paths.append(Path(1.0 + 0.0j, _dist(tx, rx) / SPEED_OF_LIGHT))
    if target_power > 0:
        ref = target_power
    elif paths:
        ref = max(abs(pa.amplitude) ** 2 for pa in paths)
    else:
        ref = 1.0
    return paths, ref


def check_delays(paths: list[Path], cfg: OfdmConfig, enforce_cp: bool = True) -> None:
    if not paths:
        return
    delays = [pa.delay for pa in paths]
    worst = max(delays)
    if worst >= cfg.max_delay:
        raise AmbiguousDelayError(
            f"path delay {worst:.4g} s exceeds the unambiguous window {cfg.max_delay:.4g} s")
    spread = worst - min(delays)
    if enforce_cp and spread > cfg.cp_duration:
        raise AmbiguousDelayError(
            f"delay spread {spread:.4g} s exceeds the cyclic prefix {cfg.cp_duration:.4g} s")


def channel_response(paths: list[Path], cfg: OfdmConfig, tx_clock: ClockState | None = None,
                     rx_clock: ClockState | None = None) -> np.ndarray:
    """Noiseless multiplicative channel ``G[k, n]`` so that ``Y = G * d + w``."""
    f = cfg.frequencies[:, None]
    n = np.arange(cfg.n_symbols)[None, :]
    T = cfg.symbol_duration
    G = np.zeros(cfg.shape, dtype=complex)
    for pa in paths:
        G += pa.amplitude * np.exp(-2j * np.pi * f * pa.delay) * np.exp(2j * np.pi * pa.doppler * n * T)
    if tx_clock is not None or rx_clock is not None:
        tx_clock = tx_clock or ClockState(-1)
        rx_clock = rx_clock or ClockState(-1)
        d_phi = rx_clock.phase - tx_clock.phase
        d_eps = rx_clock.time_offset - tx_clock.time_offset
        d_cfo = rx_clock.cfo - tx_clock.cfo
        clock = np.exp(1j * d_phi) * np.exp(-2j * np.pi * f * d_eps)
        if d_cfo:
            clock = clock * np.exp(2j * np.pi * d_cfo * n * T)
        G = G * clock
    return G


def noise_variance(snr_db: float | None, ref_power: float) -> float:
    if snr_db is None:
        return 0.0
    if not math.isfinite(snr_db):
        raise InvalidParameterError(f"SNR must be finite, got {snr_db}")
    return ref_power / 10.0 ** (snr_db / 10.0)


def synthesize_link(scene: Scene, frame: OfdmFrame, cfg: OfdmConfig, link: tuple[int, int],
                    clocks: dict[int, ClockState] | None = None, snr_db: float | None = None,
                    seed: int = 0, direct_path: bool = False,
                    enforce_cp: bool = True) -> LinkObservation:
    """Received symbols of link ``(p, q)``; ``snr_db=None`` means noiseless."""
    if frame.shape != cfg.shape:
        raise DimensionMismatchError(f"frame shape {frame.shape} does not match config {cfg.shape}")
    p, q = link
    tx, rx = scene.transmitters[p], scene.receivers[q]
    rng = link_rng(seed, tx.id, rx.id)
    paths, ref = link_paths(scene, link, cfg, rng, direct_path)
    check_delays(paths, cfg, enforce_cp)
    clocks = clocks or {}
    G = channel_response(paths, cfg, clocks.get(tx.id), clocks.get(rx.id))
    Y = G * frame.symbols
    var = noise_variance(snr_db, ref)
    if snr_db is not None:
        w = rng.standard_normal((2,) + cfg.shape)
        Y = Y + math.sqrt(var / 2.0) * (w[0] + 1j * w[1])
    Y.setflags(write=False)
    return LinkObservation(tx.id, rx.id, Y, snr_db, var, seed)


def synthesize_all(scene: Scene, frame: OfdmFrame, cfg: OfdmConfig,
                   clocks: dict[int, ClockState] | None = None, snr_db: float | None = None,
                   seed: int = 0, workers: int = 1, **kwargs) -> dict[tuple[int, int], LinkObservation]:
    """Observations for every (p, q) link, keyed by index pair."""
    links = scene.links()

    def one(link):
        return synthesize_link(scene, frame, cfg, link, clocks, snr_db, seed, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            obs = list(pool.map(one, links))
    else:
        obs = [one(link) for link in links]
    return dict(zip(links, obs))


def add_clutter(scene: Scene, count: int, amplitude_db: float, region, seed: int) -> Scene:
    """Append ``count`` static scatterers uniformly placed in ``region``.

    ``region`` is ``((x_min, x_max), (y_min, y_max))``. Amplitudes are
    circular Gaussian with mean power ``10**(amplitude_db/10)`` relative to a
    unit target.
    """
    if count < 0:
        raise InvalidParameterError("clutter count must be >= 0")
    (x0, x1), (y0, y1) = region
    if not (x1 > x0 and y1 > y0):
        raise InvalidParameterError(f"empty clutter region {region}")
    if count == 0:
        return scene
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), _CLUTTER_STREAM])))
    xs = rng.uniform(x0, x1, count)
    ys = rng.uniform(y0, y1, count)
    z = rng.standard_normal((count, 2))
    scale = math.sqrt(10.0 ** (amplitude_db / 10.0) / 2.0)
    new = tuple(Scatterer((float(x), float(y)), complex(a, b) * scale)
                for x, y, (a, b) in zip(xs, ys, z))
    return replace(scene, clutter=scene.clutter + new)
