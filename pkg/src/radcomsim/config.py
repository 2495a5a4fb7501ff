"""Experiment configuration: a YAML document parsed into dataclasses.

Every field error carries the dotted field path and, when the YAML node
can be located, its line number. See ``configs/`` and the README for the
schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from . import SPEED_OF_LIGHT
from .clocksync import SCENARIOS, ClockModel, clock_scenario
from .errors import ConfigError, RadcomError
from .fusion import GridSpec
from .scene import Scene, Target, build_fig3_network, scene_errors, scene_from_dict
from .waveform import OfdmConfig

KINDS = ("ambiguity", "ber-sweep", "sync-compare", "clutter-study")
SWEEP_PARAMS = ("snr_db", "bandwidth", "P", "Q", "sigma_t", "clutter_count")
OUTPUT_ENV = "RADCOMSIM_OUTPUT_DIR"


@dataclass(frozen=True)
class ClutterSpec:
    count: int = 0
    amplitude_db: float = -20.0
    region: tuple[tuple[float, float], tuple[float, float]] | None = None


@dataclass(frozen=True)
class ClockSpec:
    kind: str = "perfect"
    sigma_t: float = 0.0
    sigma_cfo: float = 0.0
    pin_reference: bool = False

    def model(self) -> ClockModel:
        return clock_scenario(self.kind, self.sigma_t, self.sigma_cfo)


@dataclass(frozen=True)
class GridConfig:
    """Either a square grid around the first target or explicit ranges."""

    half_width: float | None = None
    cells: int = 401
    x: tuple[float, float] | None = None
    y: tuple[float, float] | None = None
    cell: float | None = None

    def resolve(self, center, cfg: OfdmConfig, mode: str) -> GridSpec:
        if self.x is not None:
            return GridSpec(self.x[0], self.x[1], self.y[0], self.y[1], self.cell)
        hw = self.half_width
        if hw is None:
            hw = auto_half_width(cfg, mode)
        return GridSpec.around(center, hw, self.cells)


def auto_half_width(cfg: OfdmConfig, mode: str) -> float:
    """3.5 wavelengths for coherent maps, 2.5 c/B for noncoherent ones."""
    if mode == "coherent":
        return 3.5 * cfg.wavelength
    return 2.5 * SPEED_OF_LIGHT / cfg.bandwidth


@dataclass(frozen=True)
class BerSpec:
    snr_db: tuple[float, ...] = (3.0, 5.0, 7.0, 9.0, 11.0)
    bits_per_point: int = 1_000_000
    equalizer: str = "zf"
    sweep_bits: int = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    output_dir: str
    scene: Scene
    network: dict | None
    ofdm: OfdmConfig
    clocks: ClockSpec = ClockSpec()
    snr_db: float | None = 30.0
    mode: str = "coherent"
    unsync_mode: str = "noncoherent"
    threshold: float = 0.0
    grid: GridConfig = GridConfig()
    seeds: int = 20
    workers: int = 1
    clutter: ClutterSpec = ClutterSpec()
    clutter_counts: tuple[int, ...] = (0, 10, 50)
    direct_path: bool = False
    export_range_doppler: bool = False
    ber: BerSpec = BerSpec()
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def target_center(self):
        return self.scene.targets[0].position if self.scene.targets else (0.0, 0.0)


def _line_map(node, prefix="", out=None) -> dict[str, int]:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            path = f"{prefix}[{i}]"
            out[path] = v.start_mark.line + 1
            _line_map(v, path, out)
    return out


class _Reader:
    def __init__(self, data: dict, lines: dict[str, int]):
        self.data = data
        self.lines = lines

    def err(self, path, msg):
        line = self.lines.get(path)
        if line is None and "." in path:
            line = self.lines.get(path.rsplit(".", 1)[0])
        return ConfigError(msg, path, line)

    def get(self, path, default=..., kind=None):
        cur = self.data
        for part in path.split("."):
            if not isinstance(cur, dict) or part not in cur:
                if default is ...:
                    raise self.err(path, "missing required field")
                return default
            cur = cur[part]
        if kind is None or cur is None:
            return cur
        try:
            return kind(cur)
        except (TypeError, ValueError) as e:
            raise self.err(path, f"cannot read {cur!r} as {kind.__name__}: {e}") from None


def _as_int(v):
    if isinstance(v, bool):
        raise ValueError("boolean is not an integer")
    f = float(v)
    if f != int(f):
        raise ValueError("not an integer")
    return int(f)


def _pair(v):
    a, b = v
    return (float(a), float(b))


def _floats(v):
    if not isinstance(v, (list, tuple)):
        v = [v]
    return tuple(float(x) for x in v)


def _ints(v):
    if not isinstance(v, (list, tuple)):
        v = [v]
    return tuple(_as_int(x) for x in v)


def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError("expected true or false")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"{source}: YAML syntax error: {getattr(e, 'problem', e)}",
                          line=None if mark is None else mark.line + 1) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    r = _Reader(data, _line_map(node))

    kind = r.get("experiment", kind=str)
    if kind not in KINDS:
        raise r.err("experiment", f"unknown experiment {kind!r}; expected one of {KINDS}")
    seed = r.get("seed", kind=_as_int)
    out = os.environ.get(OUTPUT_ENV) or r.get("output_dir", kind=str)

    try:
        ofdm = OfdmConfig(
            carrier=r.get("ofdm.carrier", 26e9, float),
            bandwidth=r.get("ofdm.bandwidth", 400e6, float),
            n_subcarriers=r.get("ofdm.subcarriers", 32, _as_int),
            n_symbols=r.get("ofdm.symbols", 64, _as_int),
            cp_fraction=r.get("ofdm.cp_fraction", 0.25, float),
        )
    except RadcomError as e:
        if isinstance(e, ConfigError):
            raise
        raise r.err("ofdm", str(e)) from None

    network = None
    explicit = r.get("scene.transmitters", None) is not None or r.get("scene.receivers", None) is not None
    if r.get("scene.network", None) is not None or not explicit:
        network = {"P": r.get("scene.network.P", 8, _as_int),
                   "Q": r.get("scene.network.Q", 8, _as_int),
                   "spacing": r.get("scene.network.spacing", 2.0, float)}
        try:
            scene = build_fig3_network(network["P"], network["Q"], network["spacing"], ofdm.carrier)
        except RadcomError as e:
            raise r.err("scene.network", str(e)) from None
    else:
        try:
            scene = scene_from_dict({"transmitters": r.get("scene.transmitters", []),
                                     "receivers": r.get("scene.receivers", [])})
        except (KeyError, TypeError, ValueError) as e:
            raise r.err("scene", f"bad inline node list: {e}") from None
    targets = []
    for i, t in enumerate(r.get("scene.targets", [{"position": [6.0, 6.0]}]) or []):
        path = f"scene.targets[{i}]"
        try:
            amp = t.get("amplitude", 1.0)
            amp = complex(float(amp[0]), float(amp[1])) if isinstance(amp, list) else complex(float(amp))
            targets.append(Target(_pair(t["position"]), _pair(t.get("velocity", (0.0, 0.0))), amp,
                                  t.get("reflectivity", "normalized")))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise r.err(path, f"bad target: {e}") from None
    scene = replace(scene, targets=tuple(targets),
                    allow_colocated=r.get("scene.allow_colocated", False, _bool))
    problems = scene_errors(scene)
    if problems:
        raise r.err("scene", "; ".join(problems))

    center = targets[0].position if targets else (0.0, 0.0)
    region = r.get("scene.clutter.region", None)
    try:
        region = None if region is None else (_pair(region[0]), _pair(region[1]))
    except (TypeError, ValueError, IndexError) as e:
        raise r.err("scene.clutter.region", f"expected [[x0, x1], [y0, y1]]: {e}") from None
    if region is None:
        region = ((center[0] - 1.0, center[0] + 1.0), (center[1] - 1.0, center[1] + 1.0))
    clutter = ClutterSpec(r.get("scene.clutter.count", 0, _as_int),
                          r.get("scene.clutter.amplitude_db", -20.0, float), region)
    if clutter.count < 0:
        raise r.err("scene.clutter.count", "must be >= 0")

    clocks = ClockSpec(r.get("clocks.kind", "perfect", str), r.get("clocks.sigma_t", 0.0, float),
                       r.get("clocks.sigma_cfo", 0.0, float),
                       r.get("clocks.pin_reference", False, _bool))
    if clocks.kind not in SCENARIOS:
        raise r.err("clocks.kind", f"unknown clock scenario {clocks.kind!r}; expected one of {SCENARIOS}")
    try:
        clocks.model()
    except RadcomError as e:
        raise r.err("clocks", str(e)) from None

    snr = r.get("snr_db", 30.0, float)
    if snr is not None:
        if not math.isfinite(snr):
            raise r.err("snr_db", "must be finite")

    mode = r.get("fusion.mode", "coherent", str)
    unsync_mode = r.get("fusion.unsync_mode", "noncoherent", str)
    for path, m in (("fusion.mode", mode), ("fusion.unsync_mode", unsync_mode)):
        if m not in ("coherent", "noncoherent"):
            raise r.err(path, f"unknown fusion mode {m!r}")

    hw = r.get("grid.half_width", "auto")
    if hw != "auto":
        hw = r.get("grid.half_width", kind=float)
        if not hw > 0:
            raise r.err("grid.half_width", "must be positive")
    else:
        hw = None
    gx = r.get("grid.x", None)
    if gx is not None:
        grid = GridConfig(x=r.get("grid.x", kind=_pair), y=r.get("grid.y", kind=_pair),
                          cell=r.get("grid.cell", kind=float))
    else:
        grid = GridConfig(half_width=hw, cells=r.get("grid.cells", 401, _as_int))
    try:
        for m in {mode, unsync_mode}:
            grid.resolve(center, ofdm, m)
    except RadcomError as e:
        raise r.err("grid", str(e)) from None

    ber = BerSpec(r.get("ber.snr_db", BerSpec.snr_db, _floats),
                  r.get("ber.bits_per_point", BerSpec.bits_per_point, _as_int),
                  r.get("ber.equalizer", "zf", str),
                  r.get("ber.sweep_bits", BerSpec.sweep_bits, _as_int))
    if ber.equalizer not in ("zf", "mmse"):
        raise r.err("ber.equalizer", f"unknown equalizer {ber.equalizer!r}")
    if kind == "ber-sweep" and not ber.snr_db:
        raise r.err("ber.snr_db", "needs at least one SNR point")

    cfg = ExperimentConfig(
        experiment=kind, seed=seed, output_dir=out, scene=scene, network=network, ofdm=ofdm,
        clocks=clocks, snr_db=snr, mode=mode, unsync_mode=unsync_mode,
        threshold=r.get("fusion.threshold", 0.0, float), grid=grid,
        seeds=r.get("monte_carlo.seeds", 20, _as_int),
        workers=r.get("workers", 1, _as_int), clutter=clutter,
        clutter_counts=r.get("clutter_study.counts", (0, 10, 50), _ints),
        direct_path=r.get("scene.direct_path", False, _bool),
        export_range_doppler=r.get("export_range_doppler", False, _bool),
        ber=ber, raw=data)
    if cfg.seeds < 1:
        raise r.err("monte_carlo.seeds", "must be >= 1")
    if cfg.workers < 1:
        raise r.err("workers", "must be >= 1")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config(text, str(path))
