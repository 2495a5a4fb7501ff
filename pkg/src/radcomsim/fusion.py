"""Central-unit fusion of all bistatic links into a spatial ambiguity map.

For each grid cell ``x`` and link ``(p, q)`` the per-link score is the
back-projection of the channel estimate onto the hypothesized bistatic
delay ``tau_pq(x)``:

    S_pq(x) = sum_k sum_n H_pq[k, n] * exp(+j 2 pi (f_c + k df) tau_pq(x)) / (N M)

Coherent fusion takes ``|sum_pq S_pq|``; noncoherent fusion ``sum_pq |S_pq|``.
The sum over subcarriers is evaluated with Horner's rule in
``z = exp(j 2 pi df tau)``, and the carrier term is applied afterwards.

Cells are processed in fixed blocks of rows and links are accumulated in
transmitter-major order, so results do not depend on the worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Literal, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from . import SPEED_OF_LIGHT
from .channel import bistatic_direction
from .errors import (GridTooLargeError, InsufficientResolutionError, InvalidParameterError,
                     MissingLinkError, NoDetectionError, RadcomError, UndefinedSidelobeError,
                     UnobservableVelocityError, WidthUnboundedError)
from .linkproc import ChannelEstimate, Peak
from .scene import Scene
from .waveform import OfdmConfig

Mode = Literal["coherent", "noncoherent"]

MAX_CELLS = 4_000_000
PSL_FLOOR_DB = -300.0
ROW_BLOCK = 32


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of cell centers ``x_min + i * cell`` (same for y)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    cell: float
    max_cells: int = MAX_CELLS

    def __post_init__(self):
        if not (self.cell > 0 and math.isfinite(self.cell)):
            raise InvalidParameterError(f"cell size must be positive, got {self.cell}")
        if not (self.x_max >= self.x_min and self.y_max >= self.y_min):
            raise InvalidParameterError("grid ranges must be non-empty")
        if self.nx * self.ny > self.max_cells:
            raise GridTooLargeError(
                f"grid has {self.nx * self.ny} cells, limit is {self.max_cells}")

    @classmethod
    def around(cls, center, half_width: float, cells: int = 401, **kw) -> GridSpec:
        """Square grid of ``cells x cells`` centered on ``center``."""
        if cells < 2:
            raise InvalidParameterError("need at least 2 cells per axis")
        cell = 2.0 * half_width / (cells - 1)
        cx, cy = center
        return cls(cx - half_width, cx + half_width, cy - half_width, cy + half_width, cell, **kw)

    @property
    def nx(self) -> int:
        return int(round((self.x_max - self.x_min) / self.cell)) + 1

    @property
    def ny(self) -> int:
        return int(round((self.y_max - self.y_min) / self.cell)) + 1

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.cell * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y_min + self.cell * np.arange(self.ny)


@dataclass(frozen=True, eq=False)
class AmbiguityMap:
    """Non-negative values indexed ``[iy, ix]``."""

    grid: GridSpec
    values: np.ndarray
    mode: Mode

    def index_of(self, position) -> tuple[int, int]:
        ix = int(round((position[0] - self.grid.x_min) / self.grid.cell))
        iy = int(round((position[1] - self.grid.y_min) / self.grid.cell))
        return min(max(ix, 0), self.grid.nx - 1), min(max(iy, 0), self.grid.ny - 1)


def _index_estimates(estimates, scene: Scene) -> list[np.ndarray]:
    """Estimates ordered like ``scene.links()``; accepts a mapping or an iterable."""
    ids = {(tx.id, rx.id): (p, q) for p, tx in enumerate(scene.transmitters)
           for q, rx in enumerate(scene.receivers)}
    by_link: dict[tuple[int, int], ChannelEstimate] = {}
    items = estimates.values() if isinstance(estimates, Mapping) else estimates
    for est in items:
        key = ids.get((est.tx_id, est.rx_id))
        if key is None:
            raise MissingLinkError(f"estimate for unknown link ({est.tx_id}, {est.rx_id})")
        if key in by_link:
            raise MissingLinkError(f"duplicate estimate for link ({est.tx_id}, {est.rx_id})")
        by_link[key] = est
    missing = [lk for lk in scene.links() if lk not in by_link]
    if missing:
        p, q = missing[0]
        raise MissingLinkError(
            f"{len(missing)} link(s) missing, first is tx {scene.transmitters[p].id} -> "
            f"rx {scene.receivers[q].id}")
    return [np.asarray(by_link[lk].H) for lk in scene.links()]


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    acc = np.full(z.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _block_scores(Hs, scene, cfg, X, Y, mode, velocity):
    N, M = cfg.shape
    df = cfg.subcarrier_spacing
    T = cfg.symbol_duration
    txp = [np.asarray(a.position) for a in scene.transmitters]
    rxp = [np.asarray(a.position) for a in scene.receivers]
    d_tx = [np.hypot(X - p[0], Y - p[1]) for p in txp]
    d_rx = [np.hypot(X - r[0], Y - r[1]) for r in rxp]
    if velocity is None:
        h_avg = [H.mean(axis=1) for H in Hs]
    out = np.zeros(X.shape, dtype=complex if mode == "coherent" else float)
    for i, (p, q) in enumerate(scene.links()):
        tau = (d_tx[p] + d_rx[q]) / SPEED_OF_LIGHT
        z = np.exp(2j * np.pi * df * tau)
        if velocity is None:
            s = _horner(h_avg[i], z) / N
        else:
            ux = (X - txp[p][0]) / d_tx[p] + (X - rxp[q][0]) / d_rx[q]
            uy = (Y - txp[p][1]) / d_tx[p] + (Y - rxp[q][1]) / d_rx[q]
            fd = -(cfg.carrier / SPEED_OF_LIGHT) * (ux * velocity[0] + uy * velocity[1])
            w = np.exp(-2j * np.pi * fd * T)
            acc = _horner(Hs[i][:, -1], z)
            for n in range(M - 2, -1, -1):
                acc = acc * w + _horner(Hs[i][:, n], z)
            s = acc / (N * M)
        s = s * np.exp(2j * np.pi * cfg.carrier * tau)
        if mode == "coherent":
            out += s
        else:
            out += np.abs(s)
    return np.abs(out) if mode == "coherent" else out


def spatial_ambiguity(estimates, scene: Scene, cfg: OfdmConfig, grid: GridSpec,
                      mode: Mode = "coherent", velocity=None, workers: int = 1) -> AmbiguityMap:
    """Fuse every link's channel estimate into a map over ``grid``.

    ``velocity`` selects a Doppler hypothesis slice; ``None`` steers at zero
    Doppler, where the symbol average of each estimate is used directly.
    """
    if mode not in ("coherent", "noncoherent"):
        raise InvalidParameterError(f"unknown fusion mode {mode!r}")
    Hs = _index_estimates(estimates, scene)
    for H in Hs:
        if H.shape != cfg.shape:
            raise InvalidParameterError(f"estimate shape {H.shape} does not match {cfg.shape}")
    xs, ys = grid.xs, grid.ys
    blocks = [(s, min(s + ROW_BLOCK, len(ys))) for s in range(0, len(ys), ROW_BLOCK)]

    def run(block):
        a, b = block
        X, Y = np.meshgrid(xs, ys[a:b])
        return _block_scores(Hs, scene, cfg, X, Y, mode, velocity)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    values = np.concatenate(parts, axis=0)
    values.setflags(write=False)
    return AmbiguityMap(grid, values, mode)


def estimate_position(amap: AmbiguityMap) -> tuple[tuple[float, float], float]:
    """Cell center of the maximum; ties go to the lower x index, then lower y index."""
    v = amap.values
    if v.size == 0 or not np.any(v > 0):
        raise NoDetectionError("ambiguity map is empty or all zero")
    ix, iy = np.unravel_index(np.argmax(v.T), v.T.shape)
    pos = (float(amap.grid.xs[ix]), float(amap.grid.ys[iy]))
    return pos, float(v[iy, ix])


def _half_crossing(profile: np.ndarray, i0: int, coords: np.ndarray, step: int) -> float:
    thr = profile[i0] / math.sqrt(2.0)
    i = i0
    while True:
        j = i + step
        if j < 0 or j >= len(profile):
            raise WidthUnboundedError("-3 dB crossing lies outside the grid")
        if profile[j] < thr:
            frac = (profile[i] - thr) / (profile[i] - profile[j])
            return coords[i] + frac * (coords[j] - coords[i])
        i = j


def mainlobe_width_3db(amap: AmbiguityMap, peak=None) -> tuple[float, float]:
    """Full widths ``(wx, wy)`` between the first half-power crossings through ``peak``.

    Crossings are linearly interpolated between cells. The cell size must be
    at most a quarter of each width.
    """
    if peak is None:
        peak, _ = estimate_position(amap)
    ix, iy = amap.index_of(peak)
    widths = []
    for profile, i0, coords in ((amap.values[iy, :], ix, amap.grid.xs),
                                (amap.values[:, ix], iy, amap.grid.ys)):
        if not profile[i0] > 0:
            raise NoDetectionError("peak value is zero")
        w = _half_crossing(profile, i0, coords, +1) - _half_crossing(profile, i0, coords, -1)
        if amap.grid.cell > w / 4.0:
            raise InsufficientResolutionError(
                f"cell {amap.grid.cell:.3g} m exceeds a quarter of the width {w:.3g} m")
        widths.append(float(w))
    return widths[0], widths[1]


def peak_sidelobe_level(amap: AmbiguityMap, peak=None, exclusion_radius: float | None = None) -> float:
    """Largest value outside a disc around the peak, in dB relative to the peak.

    Returns ``PSL_FLOOR_DB`` when everything outside the disc is zero.
    """
    if peak is None:
        peak, _ = estimate_position(amap)
    g = amap.grid
    if exclusion_radius is None:
        exclusion_radius = g.cell
    if exclusion_radius < g.cell:
        raise InvalidParameterError("exclusion radius must cover at least one cell")
    ix, iy = amap.index_of(peak)
    top = amap.values[iy, ix]
    if not top > 0:
        raise NoDetectionError("peak value is zero")
    X, Y = np.meshgrid(g.xs, g.ys)
    outside = np.hypot(X - g.xs[ix], Y - g.ys[iy]) > exclusion_radius
    if not outside.any():
        raise UndefinedSidelobeError("exclusion disc covers the whole grid")
    side = amap.values[outside].max()
    if side <= 0:
        return PSL_FLOOR_DB
    return max(float(20.0 * np.log10(side / top)), PSL_FLOOR_DB)


def fit_velocity(link_dopplers: Mapping[tuple[int, int], float], position, scene: Scene,
                 carrier: float) -> tuple[float, float]:
    """Least-squares velocity from per-link Doppler shifts keyed by ``(p, q)``."""
    if len(link_dopplers) < 2:
        raise UnobservableVelocityError("need Doppler measurements on at least two links")
    rows, rhs = [], []
    for (p, q), fd in sorted(link_dopplers.items()):
        u = bistatic_direction(scene.transmitters[p].position, scene.receivers[q].position, position)
        rows.append(-(carrier / SPEED_OF_LIGHT) * u)
        rhs.append(fd)
    A = np.array(rows)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-9 * sv[0]:
        raise UnobservableVelocityError("link geometry does not observe both velocity components")
    v, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
    return float(v[0]), float(v[1])


def link_backprojection(est: ChannelEstimate, cfg: OfdmConfig, ranges) -> np.ndarray:
    """``|S|`` of one link as a function of hypothesized bistatic range (meters)."""
    h = np.asarray(est.H).mean(axis=1)
    tau = np.asarray(ranges, dtype=float) / SPEED_OF_LIGHT
    s = _horner(h, np.exp(2j * np.pi * cfg.subcarrier_spacing * tau)) / cfg.n_subcarriers
    return np.abs(s * np.exp(2j * np.pi * cfg.carrier * tau))


def link_range_peak(est: ChannelEstimate, cfg: OfdmConfig, r_min: float, r_max: float,
                    coarse: int = 2001) -> float:
    """Bistatic range of the link's back-projection peak inside ``[r_min, r_max]``.

    A coarse scan brackets the maximum, then a bounded scalar search refines it.
    """
    rs = np.linspace(r_min, r_max, coarse)
    i = int(np.argmax(link_backprojection(est, cfg, rs)))
    lo, hi = rs[max(i - 1, 0)], rs[min(i + 1, coarse - 1)]
    res = minimize_scalar(lambda r: -link_backprojection(est, cfg, [r])[0],
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, abs(hi))})
    return float(res.x)


@dataclass
class Detection:
    position: tuple[float, float]
    peak_value: float
    velocity: tuple[float, float] | None = None
    widths: tuple[float, float] | None = None
    psl_db: float | None = None
    errors: list[str] = field(default_factory=list)


@dataclass
class ContextReport:
    detections: list[Detection]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"detections": [asdict(d) for d in self.detections], "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> ContextReport:
        dets = []
        for x in d["detections"]:
            dets.append(Detection(
                position=tuple(x["position"]), peak_value=x["peak_value"],
                velocity=None if x.get("velocity") is None else tuple(x["velocity"]),
                widths=None if x.get("widths") is None else tuple(x["widths"]),
                psl_db=x.get("psl_db"), errors=list(x.get("errors", []))))
        return cls(dets, dict(d.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> ContextReport:
        return cls.from_dict(json.loads(text))


def noise_threshold(noise_maps: Iterable[AmbiguityMap], margin_db: float = 6.0) -> float:
    """Detection threshold: the largest noise-only map value raised by ``margin_db``."""
    top = max(float(m.values.max()) for m in noise_maps)
    return top * 10.0 ** (margin_db / 20.0)


def radio_to_context(amap: AmbiguityMap, scene: Scene, cfg: OfdmConfig,
                     link_peaks: Mapping[tuple[int, int], list[Peak]] | None = None,
                     threshold: float = 0.0, exclusion_radius: float | None = None,
                     metadata: dict | None = None) -> ContextReport:
    """Turn the fused map and per-link peaks into a context report.

    A detection is declared at the map maximum when it exceeds
    ``threshold``. Failures of individual metrics are recorded on the
    detection instead of aborting the report.
    """
    meta = dict(metadata or {})
    meta.setdefault("mode", amap.mode)
    try:
        pos, top = estimate_position(amap)
    except NoDetectionError:
        return ContextReport([], meta)
    if top <= threshold:
        return ContextReport([], meta)
    det = Detection(pos, top)
    try:
        det.widths = mainlobe_width_3db(amap, pos)
    except RadcomError as e:
        det.errors.append(f"widths: {e}")
    try:
        radius = exclusion_radius
        if radius is None:
            radius = max(det.widths) if det.widths else 3 * amap.grid.cell
        det.psl_db = peak_sidelobe_level(amap, pos, max(radius, amap.grid.cell))
    except RadcomError as e:
        det.errors.append(f"psl: {e}")
    if link_peaks:
        dopplers = {lk: peaks[0].doppler for lk, peaks in link_peaks.items() if peaks}
        try:
            det.velocity = fit_velocity(dopplers, pos, scene, cfg.carrier)
        except RadcomError as e:
            det.errors.append(f"velocity: {e}")
    return ContextReport([det], meta)
