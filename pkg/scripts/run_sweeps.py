"""Clock-error and bandwidth sweeps with the shipped configs.

    python scripts/run_sweeps.py --out out/sweeps
"""

import argparse
import csv
from dataclasses import replace
from pathlib import Path

from radcomsim.config import load_config
from radcomsim.experiments import run_sweep

ROOT = Path(__file__).resolve().parent.parent
SWEEPS = [
    ("sigma_t_sweep.yaml", "sigma_t", [0.0, 10e-12, 33e-12, 100e-12]),
    ("bandwidth_sweep.yaml", "bandwidth", [100e6, 200e6, 400e6]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=None, help="parent directory for both sweeps")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    for name, param, values in SWEEPS:
        cfg = load_config(ROOT / "configs" / name)
        if args.out:
            cfg = replace(cfg, output_dir=str(Path(args.out) / param))
        run_sweep(cfg, param, values, args.workers)
        path = Path(cfg.output_dir) / f"sweep_{param}.csv"
        print(f"== {param} ({cfg.seeds} seeds) -> {path}")
        with open(path) as fh:
            for row in csv.DictReader(fh):
                print(f"  {float(row['value']):10.3g}  error {float(row['position_error_median_m']):.3e} m  "
                      f"width {float(row['width_x_median_m']):.3e} / {float(row['width_y_median_m']):.3e} m")


if __name__ == "__main__":
    main()
