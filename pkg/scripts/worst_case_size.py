"""Frozen size of fully dense noise volumes at q=1 relative to raw f32 size."""
import argparse
import time

from sparsevol import synth
from sparsevol.compressor import CompressionParams, compress


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="32,64,128,256", help="comma separated cube edge lengths")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'dims':>12} {'dense_bytes':>12} {'frozen_bytes':>13} {'ratio':>7} {'secs':>6}")
    for n in (int(s) for s in args.sizes.split(",")):
        v = synth.make("noise", (n, n, n), args.seed)
        t0 = time.perf_counter()
        _, report = compress(v, CompressionParams(1.0))
        dt = time.perf_counter() - t0
        print(f"{f'{n}^3':>12} {report.dense_bytes:>12} {report.frozen_bytes:>13} "
              f"{report.achieved_ratio:>7.4f} {dt:>6.2f}")


if __name__ == "__main__":
    main()
