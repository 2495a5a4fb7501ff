"""Command line entry point: ``radcomsim run|sweep|validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SWEEP_PARAMS, load_config
from .errors import RadcomError
from .experiments import preflight, run_experiment, run_sweep


def _values(text: str) -> list[float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    return [float(p) for p in parts]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radcomsim",
                                 description="Cooperative multistatic OFDM radar-communication simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None)

    sw = sub.add_parser("sweep", help="sweep one parameter of a config")
    sw.add_argument("config")
    sw.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 0,10e-12,33e-12")
    sw.add_argument("--workers", type=int, default=None)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            preflight(cfg)
            print(f"ok: {cfg.experiment} config, {cfg.scene.P}x{cfg.scene.Q} links")
        elif args.command == "run":
            manifest = run_experiment(args.config, args.workers)
            for a in manifest["artifacts"]:
                print(a["path"])
        else:
            try:
                values = _values(args.values)
            except ValueError as e:
                print(f"error: --values: {e}", file=sys.stderr)
                return 2
            manifest = run_sweep(args.config, args.param, values, args.workers)
            for a in manifest["artifacts"]:
                print(a["path"])
    except RadcomError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
