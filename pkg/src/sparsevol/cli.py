"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys

from . import synth
from .compressor import CompressionParams, Metric, compress, lossless_quality
from .errors import SparseVolError
from .frozen import FrozenGrid, read_frozen
from .metrics import format_number, mse, peak_of, psnr, size_report, write_csv
from .volume import VoxelType, compute_histogram, detect_background, load_raw, save_raw


class UsageError(Exception):
    pass


def parse_dims(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like WxHxD, got {text!r}") from None
    if len(dims) != 3 or min(dims) <= 0:
        raise argparse.ArgumentTypeError(f"dims must be three positive integers WxHxD, got {text!r}")
    return dims


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.replace(",", " ").split()]


def _add_raw_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--dims", type=parse_dims, required=required, help="volume size as WxHxD")
    p.add_argument("--type", dest="voxel_type", choices=("u8", "f32"), default="f32")


def _print_report(report, out=None) -> None:
    out = out or sys.stdout
    print(f"background: {format_number(report.background)}", file=out)
    print(f"num_bricks: {report.num_bricks}", file=out)
    print(f"bricks_activated: {report.bricks_activated}", file=out)
    print(f"voxels_activated: {report.voxels_activated}", file=out)
    print(f"frozen_bytes: {report.frozen_bytes}", file=out)
    print(f"dense_bytes: {report.dense_bytes}", file=out)
    print(f"ratio: {format_number(report.achieved_ratio)}", file=out)


def cmd_compress(args) -> int:
    volume = load_raw(args.input, args.dims, args.voxel_type)
    params = CompressionParams(args.quality, Metric(args.metric), args.bins, not args.no_corners,
                               args.literal_order)
    grid, report = compress(volume, params)
    grid.write(args.output)
    _print_report(report)
    if args.report:
        err = mse(grid, volume)
        write_csv(args.report, [{
            "quality": args.quality, "metric": args.metric, "mse": err, "psnr": psnr(err, peak_of(volume)),
            "frozen_bytes": report.frozen_bytes, "ratio": report.achieved_ratio,
        }], append=True)
    return 0


def cmd_stats(args) -> int:
    volume = load_raw(args.original, args.dims, args.voxel_type)
    grid = read_frozen(args.compressed)
    err = mse(grid, volume)
    sizes = size_report(grid, volume)
    print(f"MSE {format_number(err)}")
    print(f"PSNR {format_number(psnr(err, peak_of(volume)))}")
    print(f"frozen_bytes {sizes.frozen_bytes}")
    print(f"dense_bytes {sizes.dense_bytes}")
    print(f"ratio {format_number(sizes.ratio)}")
    return 0


def cmd_sweep(args) -> int:
    qualities = _float_list(args.qualities)
    metrics = [m for m in args.metrics.replace(",", " ").split()]
    if not qualities:
        raise UsageError("--qualities must list at least one value")
    if not metrics:
        raise UsageError("--metrics must list at least one metric")
    for m in metrics:
        Metric(m)
    volume = load_raw(args.input, args.dims, args.voxel_type)
    peak = peak_of(volume)
    rows = []
    for metric in metrics:
        for q in qualities:
            grid, report = compress(volume, CompressionParams(q, Metric(metric), args.bins))
            err = mse(grid, volume)
            rows.append({"quality": q, "metric": metric, "mse": err, "psnr": psnr(err, peak),
                         "frozen_bytes": report.frozen_bytes, "ratio": report.achieved_ratio})
            print(f"{metric} q={format_number(q)} mse={format_number(err)} "
                  f"psnr={format_number(rows[-1]['psnr'])} bytes={report.frozen_bytes}")
    write_csv(args.csv, rows)
    return 0


def cmd_synth(args) -> int:
    volume = synth.make(args.kind, args.dims, args.seed)
    save_raw(args.out, volume)
    print(f"wrote {args.kind} {'x'.join(map(str, args.dims))} f32 to {args.out}")
    return 0


def _load_volume_for_render(args) -> FrozenGrid:
    if args.dims is not None:
        volume = load_raw(args.volume, args.dims, args.voxel_type)
        grid, _ = compress(volume, CompressionParams(1.0))
        return grid
    return read_frozen(args.volume)


def cmd_render(args) -> int:
    from .render import TransferFunction, load_view, render, write_ppm

    grid = _load_volume_for_render(args)
    tf = TransferFunction.load(args.tf)
    cam, settings = load_view(args.settings)
    image = render(grid, tf, cam, settings, threads=args.threads)
    write_ppm(args.out, image)
    print(f"wrote {cam.width}x{cam.height} {settings.mode} image to {args.out}")
    return 0


def cmd_info(args) -> int:
    grid = read_frozen(args.path)
    counts = grid.counts
    lo, hi = grid.value_domain
    print("format: SVDB v1")
    print(f"voxel_type: {VoxelType(grid.voxel_type).name.lower()}")
    print(f"dims: {'x'.join(map(str, grid.dims))}")
    print(f"background: {format_number(grid.background)}")
    print(f"value_domain: {format_number(lo)} {format_number(hi)}")
    print(f"root: {counts['root']}")
    print(f"upper: {counts['upper']}")
    print(f"lower: {counts['lower']}")
    print(f"leaves: {counts['leaf']}")
    print(f"active_voxels: {grid.active_voxel_count}")
    print(f"bytes: {grid.byte_size}")
    if args.original:
        if args.dims is None:
            raise UsageError("--original needs --dims")
        volume = load_raw(args.original, args.dims, args.voxel_type)
        background = detect_background(volume, compute_histogram(volume)).value
        print(f"lossless_quality: {format_number(lossless_quality(volume, background))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsevol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress a raw volume to an SVDB file")
    p.add_argument("--input", required=True)
    _add_raw_args(p)
    p.add_argument("--quality", type=float, required=True, help="fraction of bricks kept, in [0, 1]")
    p.add_argument("--metric", choices=[m.value for m in Metric], default="farthest")
    p.add_argument("--output", required=True)
    p.add_argument("--no-corners", action="store_true", help="do not force the two extreme corners active")
    p.add_argument("--bins", type=int, default=None, help="histogram bins for background detection")
    p.add_argument("--report", help="append a CSV row with mse/psnr/size")
    p.add_argument("--literal-order", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("stats", help="distortion and size of a compressed volume")
    p.add_argument("--original", required=True)
    _add_raw_args(p)
    p.add_argument("--compressed", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sweep", help="rate/distortion table over qualities and metrics")
    p.add_argument("--input", required=True)
    _add_raw_args(p)
    p.add_argument("--qualities", required=True, help="comma separated, e.g. 0.1,0.2,0.5")
    p.add_argument("--metrics", default="farthest", help="comma separated subset of closest,farthest,median")
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic f32 raw volume")
    p.add_argument("kind", choices=synth.KINDS)
    p.add_argument("--dims", type=parse_dims, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="path trace or ISO-render a volume to PPM")
    p.add_argument("--volume", required=True, help="SVDB file, or raw file when --dims is given")
    _add_raw_args(p, required=False)
    p.add_argument("--tf", required=True, help="transfer function JSON")
    p.add_argument("--settings", required=True, help="camera/settings JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("info", help="print SVDB header and node counts")
    p.add_argument("path")
    p.add_argument("--original", help="raw volume to estimate the lossless quality from")
    _add_raw_args(p, required=False)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (SparseVolError, OSError, ValueError, KeyError) as exc:
        print(f"{parser.prog} {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
