"""Compress a blob volume and render it path traced and as an ISO surface."""
import argparse
import pathlib
import time

from sparsevol import synth
from sparsevol.compressor import CompressionParams, compress
from sparsevol.render import TransferFunction, load_view, render, write_ppm

CONFIGS = pathlib.Path(__file__).parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--quality", type=float, default=0.5)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()

    v = synth.make("blobs", (64, 64, 64), 1)
    grid, report = compress(v, CompressionParams(args.quality))
    print(f"q={args.quality}: {report.bricks_activated}/{report.num_bricks} bricks, ratio {report.achieved_ratio:.3f}")
    tf = TransferFunction.load(CONFIGS / "tf_blobs.json")
    out = pathlib.Path(args.out_dir)
    for view in ("view_pathtrace.json", "view_iso.json"):
        cam, settings = load_view(CONFIGS / view)
        t0 = time.perf_counter()
        img = render(grid, tf, cam, settings, threads=args.threads)
        path = out / f"blobs_{settings.mode}.ppm"
        write_ppm(path, img)
        print(f"{settings.mode}: {path} in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
