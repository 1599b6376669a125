"""Distortion and size statistics for compressed grids."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimsMismatch
from .frozen import FrozenGrid
from .volume import DenseVolume

CSV_FIELDS = ("quality", "metric", "mse", "psnr", "frozen_bytes", "ratio")


def mse(g: FrozenGrid, v: DenseVolume) -> float:
    """Mean squared error at voxel centers (no interpolation)."""
    if g.dims != v.dims:
        raise DimsMismatch(f"grid dims {g.dims} != volume dims {v.dims}")
    diff = g.to_dense().astype(np.float64) - v.grid.astype(np.float64)
    return float(np.mean(np.square(diff).ravel()))


def psnr(mse_value: float, peak: float) -> float:
    """PSNR in dB; ``inf`` for a lossless reconstruction."""
    if mse_value < 0:
        raise ValueError("mse must be non-negative")
    if mse_value == 0:
        return math.inf
    if peak <= 0:
        raise ValueError("peak must be positive")
    return 10.0 * math.log10(peak * peak / mse_value)


def peak_of(v: DenseVolume) -> float:
    lo, hi = v.value_domain
    return hi - lo


@dataclass(frozen=True)
class SizeReport:
    frozen_bytes: int
    dense_bytes: int

    @property
    def ratio(self) -> float:
        return self.frozen_bytes / self.dense_bytes


def size_report(g: FrozenGrid, v: DenseVolume) -> SizeReport:
    return SizeReport(g.byte_size, v.num_voxels * 4)


def format_number(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def write_csv(path: str | os.PathLike, rows: Iterable[dict], append: bool = False) -> None:
    """Write sweep rows; the header is emitted unless appending to a non-empty file."""
    write_header = not (append and os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if write_header:
            w.writerow(CSV_FIELDS)
        for row in rows:
            w.writerow([
                format_number(row["quality"]),
                row["metric"],
                format_number(row["mse"]),
                format_number(row["psnr"]),
                str(int(row["frozen_bytes"])),
                format_number(row["ratio"]),
            ])


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("quality", "mse", "psnr", "ratio"):
            row[key] = float(row[key])
        row["frozen_bytes"] = int(row["frozen_bytes"])
    return rows
