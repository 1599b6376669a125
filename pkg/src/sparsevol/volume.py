"""Dense structured-regular volumes: raw ingestion, histograms, background
detection and sub-box value ranges."""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import EmptyBox, NonFiniteVoxel, SizeMismatch

Dims = tuple[int, int, int]


class VoxelType(enum.IntEnum):
    U8 = 0
    F32 = 1

    @property
    def itemsize(self) -> int:
        return 1 if self is VoxelType.U8 else 4

    @classmethod
    def parse(cls, name: "str | VoxelType") -> "VoxelType":
        if isinstance(name, VoxelType):
            return name
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown voxel type {name!r} (expected u8 or f32)") from None


@dataclass(frozen=True)
class DenseVolume:
    """W x H x D scalar grid.

    ``data`` is the flat x-fastest array of length W*H*D. Values are held as
    float32 so that they are exactly representable in the sparse tree; all
    reductions over them are done in float64. ``grid`` is an ``[x, y, z]``
    indexed view of the same memory.
    """

    dims: Dims
    data: NDArray[np.float32]
    voxel_type: VoxelType = VoxelType.F32
    value_domain: tuple[float, float] = field(default=(0.0, 0.0))

    def __post_init__(self):
        w, h, d = self.dims
        if min(self.dims) <= 0:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.data.size != w * h * d:
            raise SizeMismatch(f"data has {self.data.size} values, dims {self.dims} need {w * h * d}")

    @classmethod
    def from_array(cls, grid: NDArray, voxel_type: VoxelType = VoxelType.F32) -> "DenseVolume":
        """Build from an ``[x, y, z]`` indexed array."""
        grid = np.asarray(grid)
        if grid.ndim != 3:
            raise ValueError("expected a 3-D array indexed [x, y, z]")
        data = np.ascontiguousarray(grid.astype(np.float32).transpose(2, 1, 0)).ravel()
        if not np.all(np.isfinite(data)):
            raise NonFiniteVoxel("volume contains NaN or Inf")
        dims = tuple(int(n) for n in grid.shape)
        return cls(dims, data, voxel_type, (float(data.min()), float(data.max())))

    @property
    def grid(self) -> NDArray[np.float32]:
        w, h, d = self.dims
        return self.data.reshape(d, h, w).transpose(2, 1, 0)

    @property
    def num_voxels(self) -> int:
        w, h, d = self.dims
        return w * h * d

    def at(self, x: int, y: int, z: int) -> float:
        w, h, _ = self.dims
        return float(self.data[x + w * (y + h * z)])


def load_raw(path: str | os.PathLike, dims: Dims, voxel_type: str | VoxelType) -> DenseVolume:
    vt = VoxelType.parse(voxel_type)
    w, h, d = dims
    expected = w * h * d * vt.itemsize
    actual = os.path.getsize(path)
    if actual != expected:
        raise SizeMismatch(f"{path}: {actual} bytes, expected {expected} for {dims} {vt.name.lower()}")
    raw = Path(path).read_bytes()
    if vt is VoxelType.U8:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0).astype(np.float32)
    else:
        data = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        if not np.all(np.isfinite(data)):
            raise NonFiniteVoxel(f"{path}: contains NaN or Inf voxels")
    return DenseVolume(tuple(dims), data, vt, (float(data.min()), float(data.max())))


def save_raw(path: str | os.PathLike, volume: DenseVolume) -> None:
    """Write little-endian f32, x fastest."""
    Path(path).write_bytes(volume.data.astype("<f4").tobytes())


@dataclass(frozen=True)
class Histogram:
    bin_count: int
    domain: tuple[float, float]
    counts: NDArray[np.int64]

    def bin_index(self, values: NDArray) -> NDArray[np.int64]:
        lo, hi = self.domain
        values = np.asarray(values, dtype=np.float64)
        if hi == lo:
            return np.zeros(values.shape, dtype=np.int64)
        idx = np.floor((values - lo) / (hi - lo) * self.bin_count).astype(np.int64)
        return np.clip(idx, 0, self.bin_count - 1)


def default_bins(voxel_type: VoxelType) -> int:
    # 256 bins keep background detection exact for 8-bit data
    return 256 if voxel_type is VoxelType.U8 else 1024


def compute_histogram(v: DenseVolume, bin_count: int | None = None) -> Histogram:
    if bin_count is None:
        bin_count = default_bins(v.voxel_type)
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    hist = Histogram(bin_count, v.value_domain, np.zeros(bin_count, dtype=np.int64))
    idx = hist.bin_index(v.data)
    counts = np.bincount(idx, minlength=bin_count).astype(np.int64)
    return Histogram(bin_count, v.value_domain, counts)


@dataclass(frozen=True)
class BackgroundValue:
    value: float
    source_bin: int


def detect_background(v: DenseVolume, h: Histogram) -> BackgroundValue:
    """Most frequent exact value inside the fullest histogram bin.

    Ties go to the lowest bin, then to the smallest value.
    """
    source_bin = int(np.argmax(h.counts))
    in_bin = v.data[h.bin_index(v.data) == source_bin]
    values, counts = np.unique(in_bin, return_counts=True)
    return BackgroundValue(float(values[np.argmax(counts)]), source_bin)


def value_range(v: DenseVolume, lo_corner, hi_corner) -> tuple[float, float]:
    """Exact (min, max) over the half-open box [lo_corner, hi_corner), clipped to the volume."""
    lo = np.maximum(np.asarray(lo_corner, dtype=np.int64), 0)
    hi = np.minimum(np.asarray(hi_corner, dtype=np.int64), v.dims)
    if np.any(hi <= lo):
        raise EmptyBox(f"box {tuple(lo_corner)}..{tuple(hi_corner)} is empty inside {v.dims}")
    block = v.grid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    return float(block.min()), float(block.max())
