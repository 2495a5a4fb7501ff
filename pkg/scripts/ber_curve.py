"""QPSK-OFDM bit error rate against the AWGN closed form.

    python scripts/ber_curve.py --snr 0 2 4 6 8 10 --bits 1000000
"""

import argparse

from radcomsim.commlink import QPSK_BITS_DB, ber_point, qpsk_ber_theory
from radcomsim.experiments import derive_seed
from radcomsim.waveform import OfdmConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--snr", type=float, nargs="+", default=[3.0, 5.0, 7.0, 9.0, 11.0],
                    help="per-symbol SNR (Es/N0) in dB")
    ap.add_argument("--bits", type=int, default=1_000_000)
    ap.add_argument("--equalizer", choices=["zf", "mmse"], default="zf")
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    cfg = OfdmConfig()
    print("snr_db  ebn0_db  errors      bits  measured   theory    ratio")
    for i, snr in enumerate(args.snr):
        _, r = ber_point(cfg, snr, args.bits, derive_seed(args.seed, i), args.equalizer)
        th = qpsk_ber_theory(snr - QPSK_BITS_DB)
        ratio = r.rate / th if th > 0 else float("nan")
        print(f"{snr:6.2f} {snr - QPSK_BITS_DB:8.2f} {r.errors:7d} {r.total:9d} "
              f"{r.rate:9.3e} {th:9.3e} {ratio:7.3f}")


if __name__ == "__main__":
    main()
