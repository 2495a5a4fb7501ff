"""Deterministic artifact writers: CSV tables, PGM heatmaps, run manifests."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .fusion import AmbiguityMap
from .linkproc import RangeDopplerMap


def fmt(v) -> str:
    """CSV cell: ints verbatim, floats in 9-significant-digit scientific notation."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.8e}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")
    return path


def write_map_csv(amap: AmbiguityMap, path) -> Path:
    """Matrix layout: header ``y_m\\x_m,<x values>``, then one row per y."""
    header = ["y_m\\x_m"] + [fmt(x) for x in amap.grid.xs]
    rows = ([y] + list(row) for y, row in zip(amap.grid.ys, amap.values))
    return write_csv(path, header, rows)


def write_range_doppler_csv(rd: RangeDopplerMap, path) -> Path:
    N, M = rd.magnitude.shape
    rows = ((i, j, i * rd.delay_bin, rd.doppler_of(j), rd.magnitude[i, j])
            for i in range(N) for j in range(M))
    return write_csv(path, ["delay_bin", "doppler_bin", "delay_s", "doppler_hz", "magnitude"], rows)


def heatmap_pixels(values: np.ndarray) -> np.ndarray:
    """Linear map of ``[0, peak]`` onto ``0..255`` (round half to even); all-zero stays 0."""
    v = np.asarray(values, dtype=float)
    peak = v.max() if v.size else 0.0
    if peak <= 0:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.rint(np.clip(v / peak, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_heatmap(amap: AmbiguityMap, path) -> tuple[Path, Path]:
    """Binary PGM (P5), row 0 = smallest y, plus a ``.txt`` sidecar with the axes."""
    path = Path(path)
    if amap.values.size == 0:
        raise ValueError("empty map")
    px = heatmap_pixels(amap.values)
    h, w = px.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes())
    g = amap.grid
    side = path.with_name(path.name + ".txt")
    side.write_text(
        f"mode {amap.mode}\n"
        f"columns x_m from {fmt(g.x_min)} step {fmt(g.cell)} count {g.nx}\n"
        f"rows y_m from {fmt(g.y_min)} step {fmt(g.cell)} count {g.ny}\n"
        f"row 0 is the smallest y; pixel 255 is the map peak {fmt(amap.values.max())}\n",
        encoding="ascii", newline="\n")
    return path, side


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_entries(paths, root) -> list[dict]:
    root = Path(root)
    return [{"path": Path(p).relative_to(root).as_posix(), "sha256": sha256_file(p),
             "bytes": Path(p).stat().st_size} for p in sorted(paths, key=lambda p: str(p))]


def verify_manifest(manifest: dict, root) -> list[str]:
    """Return problems found; empty when every listed file exists with its digest."""
    root = Path(root)
    problems = []
    for entry in manifest["artifacts"]:
        p = root / entry["path"]
        if not p.exists():
            problems.append(f"missing {entry['path']}")
        elif sha256_file(p) != entry["sha256"]:
            problems.append(f"digest mismatch {entry['path']}")
    return problems
