"""Experiment orchestration: one function per experiment kind plus sweeps.

Every run writes its artifacts under the configured output directory and a
``manifest.json`` listing them with SHA-256 digests. CSV and report files
depend only on the configuration and seed, never on the worker count.
"""

from __future__ import annotations

import copy
import logging
import math
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .artifacts import (manifest_entries, write_csv, write_heatmap, write_json, write_map_csv,
                        write_range_doppler_csv)
from .channel import add_clutter, check_delays, link_paths, synthesize_all
from .clocksync import sample_clocks
from .commlink import QPSK_BITS_DB, ber_point, qpsk_ber_theory
from .config import SWEEP_PARAMS, ClockSpec, ExperimentConfig, load_config, parse_config
from .errors import ConfigError, RadcomError
from .fusion import (AmbiguityMap, estimate_position, mainlobe_width_3db,
                     peak_sidelobe_level, radio_to_context, spatial_ambiguity)
from .linkproc import estimate_channel_ls, extract_peaks, range_doppler_map
from .scene import Scene
from .waveform import generate_frame

log = logging.getLogger(__name__)

SYNC = ClockSpec("perfect")
TIME_ONLY = ClockSpec("time-only")


def derive_seed(seed: int, index: int) -> int:
    """Seed of Monte Carlo trial ``index``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def build_scene(cfg: ExperimentConfig, clutter_count: int | None = None) -> Scene:
    count = cfg.clutter.count if clutter_count is None else clutter_count
    return add_clutter(cfg.scene, count, cfg.clutter.amplitude_db, cfg.clutter.region, cfg.seed)


def preflight(cfg: ExperimentConfig) -> None:
    """Surface geometry violations before any long computation."""
    counts = [cfg.clutter.count]
    if cfg.experiment == "clutter-study":
        counts = list(cfg.clutter_counts)
    if cfg.experiment == "ber-sweep":
        return
    for count in counts:
        scene = build_scene(cfg, count)
        for link in scene.links():
            paths, _ = link_paths(scene, link, cfg.ofdm, np.random.default_rng(0), cfg.direct_path)
            try:
                check_delays(paths, cfg.ofdm)
            except RadcomError as e:
                raise ConfigError(f"link {link}: {e}", field="scene") from None


@dataclass
class RegimeRun:
    amap: AmbiguityMap
    estimates: dict
    frame: object


def run_regime(cfg: ExperimentConfig, scene: Scene, clocks: ClockSpec, mode: str, seed: int,
               workers: int = 1, grid=None) -> RegimeRun:
    frame = generate_frame(cfg.ofdm, seed)
    states = sample_clocks(clocks.model(), scene.node_ids, seed, clocks.pin_reference)
    obs = synthesize_all(scene, frame, cfg.ofdm, states, cfg.snr_db, seed, workers,
                         direct_path=cfg.direct_path)
    est = {k: estimate_channel_ls(o, frame) for k, o in obs.items()}
    grid = grid or cfg.grid.resolve(cfg.target_center, cfg.ofdm, mode)
    amap = spatial_ambiguity(est, scene, cfg.ofdm, grid, mode, workers=workers)
    return RegimeRun(amap, est, frame)


def map_metrics(amap: AmbiguityMap, truth) -> dict:
    """Position, error, widths and PSL; metrics that cannot be measured are NaN."""
    pos, top = estimate_position(amap)
    out = {"position": list(pos), "peak": top,
           "position_error": math.hypot(pos[0] - truth[0], pos[1] - truth[1]),
           "width_x": math.nan, "width_y": math.nan, "psl_db": math.nan}
    try:
        out["width_x"], out["width_y"] = mainlobe_width_3db(amap, pos)
    except RadcomError as e:
        out["width_error"] = str(e)
    radius = max(out["width_x"], out["width_y"]) if not math.isnan(out["width_x"]) else 3 * amap.grid.cell
    try:
        out["psl_db"] = peak_sidelobe_level(amap, pos, max(radius, amap.grid.cell))
    except RadcomError as e:
        out["psl_error"] = str(e)
    return out


def _metadata(cfg: ExperimentConfig, clocks: ClockSpec, mode: str, seed: int, scene: Scene) -> dict:
    return {"sync_regime": clocks.kind, "sigma_t": clocks.sigma_t, "mode": mode,
            "snr_db": cfg.snr_db, "seed": seed, "P": scene.P, "Q": scene.Q,
            "carrier": cfg.ofdm.carrier, "bandwidth": cfg.ofdm.bandwidth,
            "subcarriers": cfg.ofdm.n_subcarriers, "symbols": cfg.ofdm.n_symbols,
            "clutter": len(scene.clutter), "version": __version__}


def _write_map(amap: AmbiguityMap, out: Path, stem: str) -> list[Path]:
    csv = write_map_csv(amap, out / f"{stem}.csv")
    pgm, side = write_heatmap(amap, out / f"{stem}.pgm")
    return [csv, pgm, side]


def experiment_ambiguity(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    scene = build_scene(cfg)
    run = run_regime(cfg, scene, cfg.clocks, cfg.mode, cfg.seed, workers)
    files = _write_map(run.amap, out, "ambiguity")
    link_peaks = {}
    for (p, q), est in run.estimates.items():
        rd = range_doppler_map(est, cfg.ofdm)
        link_peaks[(p, q)] = extract_peaks(rd, 1)
        if cfg.export_range_doppler:
            (out / "range_doppler").mkdir(exist_ok=True)
            files.append(write_range_doppler_csv(
                rd, out / "range_doppler" / f"tx{est.tx_id}_rx{est.rx_id}.csv"))
    report = radio_to_context(run.amap, scene, cfg.ofdm, link_peaks, cfg.threshold,
                              metadata=_metadata(cfg, cfg.clocks, cfg.mode, cfg.seed, scene))
    (out / "report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    files.append(out / "report.json")
    return files


def sync_compare(cfg: ExperimentConfig, workers: int = 1) -> tuple[dict, dict[str, AmbiguityMap]]:
    """Phase+time synchronized vs time-only networks."""
    scene = build_scene(cfg)
    truth = cfg.target_center
    maps, metrics = {}, {}
    for name, clocks, mode in (("sync", SYNC, "coherent"), ("time_only", TIME_ONLY, cfg.unsync_mode)):
        run = run_regime(cfg, scene, clocks, mode, cfg.seed, workers)
        maps[name] = run.amap
        metrics[name] = map_metrics(run.amap, truth) | {"mode": mode, "regime": clocks.kind}
    s, t = metrics["sync"], metrics["time_only"]
    metrics["width_ratio_x"] = t["width_x"] / s["width_x"]
    metrics["width_ratio_y"] = t["width_y"] / s["width_y"]
    metrics["width_ratio"] = math.sqrt(metrics["width_ratio_x"] * metrics["width_ratio_y"])
    metrics["carrier_over_bandwidth"] = cfg.ofdm.carrier / cfg.ofdm.bandwidth
    metrics["metadata"] = _metadata(cfg, SYNC, "coherent", cfg.seed, scene)
    return metrics, maps


def experiment_sync_compare(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    metrics, maps = sync_compare(cfg, workers)
    files = _write_map(maps["sync"], out, "ambiguity_sync")
    files += _write_map(maps["time_only"], out, "ambiguity_time_only")
    files.append(write_json(metrics, out / "metrics.json"))
    rows = [(name, metrics[name]["mode"], metrics[name]["width_x"], metrics[name]["width_y"],
             metrics[name]["position_error"], metrics[name]["psl_db"])
            for name in ("sync", "time_only")]
    files.append(write_csv(out / "metrics.csv",
                           ["regime", "mode", "width_x_m", "width_y_m", "position_error_m", "psl_db"],
                           rows))
    return files


def ber_rows(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    for i, snr in enumerate(cfg.ber.snr_db):
        trials, res = ber_point(cfg.ofdm, snr, cfg.ber.bits_per_point, derive_seed(cfg.seed, i),
                                cfg.ber.equalizer)
        rows.append((snr, trials, res.errors, res.rate, qpsk_ber_theory(snr - QPSK_BITS_DB)))
    return rows


def experiment_ber_sweep(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    return [write_csv(out / "ber.csv", ["snr_db", "trials", "errors", "rate", "theory"],
                      ber_rows(cfg))]


def experiment_clutter_study(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    rows = []
    for count in cfg.clutter_counts:
        scene = build_scene(cfg, count)
        m = map_metrics(run_regime(cfg, scene, cfg.clocks, cfg.mode, cfg.seed, workers).amap,
                        cfg.target_center)
        rows.append((count, m["position_error"], m["width_x"], m["width_y"], m["psl_db"], m["peak"]))
    return [write_csv(out / "clutter.csv",
                      ["clutter_count", "position_error_m", "width_x_m", "width_y_m", "psl_db", "peak"],
                      rows)]


EXPERIMENTS = {
    "ambiguity": experiment_ambiguity,
    "sync-compare": experiment_sync_compare,
    "ber-sweep": experiment_ber_sweep,
    "clutter-study": experiment_clutter_study,
}


def _finish(cfg: ExperimentConfig, out: Path, files, started: float, extra=None) -> dict:
    manifest = {"config": cfg.raw, "tool": "radcomsim", "version": __version__,
                "artifacts": manifest_entries(files, out),
                "duration_s": round(time.perf_counter() - started, 3)}
    if extra:
        manifest.update(extra)
    write_json(manifest, out / "manifest.json")
    return manifest


def _prepare(config, workers):
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    preflight(cfg)
    return cfg, workers or cfg.workers


def run_experiment(config, workers: int | None = None) -> dict:
    """Run the configured experiment; ``config`` is a path or a parsed config."""
    started = time.perf_counter()
    cfg, workers = _prepare(config, workers)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s into %s with %d worker(s)", cfg.experiment, out, workers)
    files = EXPERIMENTS[cfg.experiment](cfg, out, workers)
    return _finish(cfg, out, files, started)


def with_param(cfg: ExperimentConfig, name: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with one whitelisted parameter replaced, re-validated."""
    raw = copy.deepcopy(cfg.raw)
    if name == "snr_db":
        raw["snr_db"] = float(value)
    elif name == "bandwidth":
        raw.setdefault("ofdm", {})["bandwidth"] = float(value)
    elif name in ("P", "Q"):
        if cfg.network is None:
            raise ConfigError(f"sweeping {name} needs a scene.network section", field="scene.network")
        raw.setdefault("scene", {}).setdefault("network", {})[name] = int(value)
    elif name == "sigma_t":
        raw.setdefault("clocks", {})["sigma_t"] = float(value)
    elif name == "clutter_count":
        raw.setdefault("scene", {}).setdefault("clutter", {})["count"] = int(value)
    else:
        raise ConfigError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}",
                          field="--param")
    new = parse_config(yaml.safe_dump(raw, sort_keys=True))
    return replace(new, output_dir=cfg.output_dir)


SWEEP_HEADER = ["value", "seeds", "position_error_median_m", "width_x_median_m",
                "width_y_median_m", "psl_db_median", "ber"]


def _median(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return statistics.median(xs) if xs else math.nan


def sweep_rows(cfg: ExperimentConfig, name: str, values, workers: int = 1) -> list[tuple]:
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value", field="--values")
    if name not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMS}",
                          field="--param")
    point_cfgs = [with_param(cfg, name, v) for v in values]
    for c in point_cfgs:
        preflight(c)
    rows = []
    for v, c in zip(values, point_cfgs):
        scene = build_scene(c)
        ms = [map_metrics(run_regime(c, scene, c.clocks, c.mode, derive_seed(c.seed, i), workers).amap,
                          c.target_center) for i in range(c.seeds)]
        if c.snr_db is None:
            ber = 0.0
        else:
            _, res = ber_point(c.ofdm, c.snr_db, c.ber.sweep_bits, c.seed, c.ber.equalizer)
            ber = res.rate
        rows.append((v, c.seeds, _median([m["position_error"] for m in ms]),
                     _median([m["width_x"] for m in ms]), _median([m["width_y"] for m in ms]),
                     _median([m["psl_db"] for m in ms]), ber))
    return rows


def run_sweep(config, name: str, values, workers: int | None = None) -> dict:
    started = time.perf_counter()
    cfg, workers = _prepare(config, workers)
    rows = sweep_rows(cfg, name, values, workers)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_csv(out / f"sweep_{name}.csv", SWEEP_HEADER, rows)
    return _finish(cfg, out, [path], started, {"sweep": {"param": name, "values": list(values)}})
