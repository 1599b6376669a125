"""Immutable, contiguous, index-based snapshot of a sparse tree (SVDB format).

The whole grid lives in one byte buffer; node arrays are numpy views into it
and every cross reference is an array index, so the buffer can be copied,
written or memory-mapped as is. Layout (little-endian, every section and
record a multiple of 8 bytes)::

    header        72 B   magic "SVDB", version, voxel_type, dims[3],
                         background, value_domain[2], pad, counts[4]
    root          16 B   origin[3] i32, upper index u32        (sorted z, y, x)
    upper nodes   139280 B  origin[3] i32, pad, payload u32[32768],
                         child bits u64[512], tile bits u64[512]
    lower nodes   17424 B   origin[3] i32, pad, payload u32[4096],
                         child bits u64[64], tile bits u64[64]
    leaves        2128 B    origin[3] i32, pad, active bits u64[8], values f32[512]

A payload slot holds a child index when its child bit is set, or the f32 bit
pattern of a constant tile value when its tile bit is set.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from numba import njit
from numpy.typing import NDArray

from .errors import BadMagic, CorruptIndex, VersionMismatch
from .tree import (
    LEAF_SPAN,
    LEAF_VOXELS,
    LOWER_SLOTS,
    LOWER_SPAN,
    UPPER_SLOTS,
    UPPER_SPAN,
    SparseGridBuilder,
)

MAGIC = b"SVDB"
VERSION = 1

HEADER_DTYPE = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("voxel_type", "<u4"),
        ("dims", "<u4", 3),
        ("background", "<f4"),
        ("value_domain", "<f4", 2),
        ("pad", "<u4"),
        ("counts", "<u8", 4),
    ]
)
ROOT_DTYPE = np.dtype([("origin", "<i4", 3), ("index", "<u4")])


def _node_dtype(slots: int) -> np.dtype:
    return np.dtype(
        [
            ("origin", "<i4", 3),
            ("pad", "<u4"),
            ("payload", "<u4", slots),
            ("child_mask", "<u8", slots // 64),
            ("tile_mask", "<u8", slots // 64),
        ]
    )


UPPER_DTYPE = _node_dtype(UPPER_SLOTS)
LOWER_DTYPE = _node_dtype(LOWER_SLOTS)
LEAF_DTYPE = np.dtype(
    [("origin", "<i4", 3), ("pad", "<u4"), ("mask", "<u8", LEAF_VOXELS // 64), ("values", "<f4", LEAF_VOXELS)]
)

HEADER_BYTES = HEADER_DTYPE.itemsize


def byte_size_for(n_upper: int, n_lower: int, n_leaf: int, n_root: int | None = None) -> int:
    """Exact serialized size for the given node counts."""
    if n_root is None:
        n_root = n_upper
    return (
        HEADER_BYTES
        + n_root * ROOT_DTYPE.itemsize
        + n_upper * UPPER_DTYPE.itemsize
        + n_lower * LOWER_DTYPE.itemsize
        + n_leaf * LEAF_DTYPE.itemsize
    )


_ROOT_BIAS = 1 << 20


def root_key(origin) -> int:
    """Sortable int64 key of an upper-node origin; orders by (z, y, x)."""
    x, y, z = (int(c) >> 12 for c in origin)
    return ((z + _ROOT_BIAS) << 42) | ((y + _ROOT_BIAS) << 21) | (x + _ROOT_BIAS)


def _bits(flags: NDArray[np.bool_]) -> NDArray[np.uint64]:
    return np.packbits(flags, axis=-1, bitorder="little").view("<u8")


def _unbits(words: NDArray[np.uint64]) -> NDArray[np.bool_]:
    return np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=-1, bitorder="little").astype(bool)


class FrozenGrid:
    """Read-only sparse grid backed by a single contiguous buffer."""

    def __init__(self, buffer: bytes | bytearray | NDArray[np.uint8]):
        # private aligned, writable copy keeps one compiled signature for all grids
        buf = np.array(np.frombuffer(buffer, dtype=np.uint8)) if not isinstance(buffer, np.ndarray) else buffer
        if buf.size < HEADER_BYTES:
            raise CorruptIndex(f"buffer of {buf.size} bytes is shorter than the header")
        header = np.frombuffer(buf, HEADER_DTYPE, count=1)[0]
        if bytes(header["magic"]) != MAGIC:
            raise BadMagic(f"bad magic {bytes(header['magic'])!r}")
        if int(header["version"]) != VERSION:
            raise VersionMismatch(f"version {int(header['version'])}, expected {VERSION}")
        if int(header["voxel_type"]) not in (0, 1):
            raise CorruptIndex(f"unknown voxel type {int(header['voxel_type'])}")
        n_upper, n_lower, n_leaf, n_root = (int(c) for c in header["counts"])
        expected = byte_size_for(n_upper, n_lower, n_leaf, n_root)
        if expected != buf.size:
            raise CorruptIndex(f"buffer holds {buf.size} bytes, node counts require {expected}")

        self.buffer = buf
        self.header = header
        offset = HEADER_BYTES
        self.root = np.frombuffer(buf, ROOT_DTYPE, count=n_root, offset=offset)
        offset += n_root * ROOT_DTYPE.itemsize
        self.upper = np.frombuffer(buf, UPPER_DTYPE, count=n_upper, offset=offset)
        offset += n_upper * UPPER_DTYPE.itemsize
        self.lower = np.frombuffer(buf, LOWER_DTYPE, count=n_lower, offset=offset)
        offset += n_lower * LOWER_DTYPE.itemsize
        self.leaves = np.frombuffer(buf, LEAF_DTYPE, count=n_leaf, offset=offset)
        self._validate()
        self.root_keys = np.array([root_key(o) for o in self.root["origin"]], dtype=np.int64)
        self._kernel_args = None

    def _validate(self):
        n_upper, n_lower, n_leaf = len(self.upper), len(self.lower), len(self.leaves)
        if len(self.root) != n_upper:
            raise CorruptIndex("root directory and upper node counts differ")
        if np.any(self.root["index"] >= n_upper):
            raise CorruptIndex("root entry points past the upper node array")
        keys = [root_key(o) for o in self.root["origin"]]
        if any(a >= b for a, b in zip(keys, keys[1:])):
            raise CorruptIndex("root directory is not strictly sorted")
        for nodes, span, n_child, name in (
            (self.root, UPPER_SPAN, None, "root"),
            (self.upper, UPPER_SPAN, n_lower, "upper"),
            (self.lower, LOWER_SPAN, n_leaf, "lower"),
            (self.leaves, LEAF_SPAN, None, "leaf"),
        ):
            if len(nodes) and np.any(nodes["origin"] % span):
                raise CorruptIndex(f"misaligned {name} node origin")
            if n_child is None or not len(nodes):
                continue
            child = _unbits(nodes["child_mask"])
            if np.any(child & _unbits(nodes["tile_mask"])):
                raise CorruptIndex(f"{name} slot flagged both child and tile")
            if np.any(nodes["payload"][child] >= n_child):
                raise CorruptIndex(f"{name} node child index out of range")

    @classmethod
    def from_builder(cls, b: SparseGridBuilder) -> "FrozenGrid":
        zyx = lambda item: (item[0][2], item[0][1], item[0][0])  # noqa: E731
        uppers = sorted(b.root.items(), key=zyx)
        lowers = sorted(((n.origin, n) for _, u in uppers for n in u.children.values()), key=zyx)
        leaves = sorted(((f.origin, f) for _, n in lowers for f in n.children.values()), key=zyx)
        lower_index = {id(n): i for i, (_, n) in enumerate(lowers)}
        leaf_index = {id(f): i for i, (_, f) in enumerate(leaves)}

        n_upper, n_lower, n_leaf = len(uppers), len(lowers), len(leaves)
        buf = np.zeros(byte_size_for(n_upper, n_lower, n_leaf), dtype=np.uint8)
        header = np.frombuffer(buf, HEADER_DTYPE, count=1)
        header["magic"] = MAGIC
        header["version"] = VERSION
        header["voxel_type"] = b.voxel_type
        header["dims"] = b.dims
        header["background"] = b.background
        header["value_domain"] = b.value_domain
        header["counts"] = (n_upper, n_lower, n_leaf, n_upper)

        offset = HEADER_BYTES
        root = np.frombuffer(buf, ROOT_DTYPE, count=n_upper, offset=offset)
        offset += root.nbytes
        upper = np.frombuffer(buf, UPPER_DTYPE, count=n_upper, offset=offset)
        offset += upper.nbytes
        lower = np.frombuffer(buf, LOWER_DTYPE, count=n_lower, offset=offset)
        offset += lower.nbytes
        leaf = np.frombuffer(buf, LEAF_DTYPE, count=n_leaf, offset=offset)

        def fill(dst, i, node, child_index, slots):
            dst["origin"][i] = node.origin
            payload = np.zeros(slots, dtype=np.uint32)
            child = np.zeros(slots, dtype=bool)
            tile = np.zeros(slots, dtype=bool)
            for slot, c in node.children.items():
                payload[slot] = child_index[id(c)]
                child[slot] = True
            if node.tiles:
                slots_t = np.fromiter(node.tiles.keys(), dtype=np.int64, count=len(node.tiles))
                vals = np.fromiter(node.tiles.values(), dtype=np.float32, count=len(node.tiles))
                payload[slots_t] = vals.view(np.uint32)
                tile[slots_t] = True
            dst["payload"][i] = payload
            dst["child_mask"][i] = _bits(child)
            dst["tile_mask"][i] = _bits(tile)

        for i, (origin, node) in enumerate(uppers):
            root["origin"][i] = origin
            root["index"][i] = i
            fill(upper, i, node, lower_index, UPPER_SLOTS)
        for i, (_, node) in enumerate(lowers):
            fill(lower, i, node, leaf_index, LOWER_SLOTS)
        for i, (origin, node) in enumerate(leaves):
            leaf["origin"][i] = origin
            leaf["mask"][i] = _bits(node.mask)
            leaf["values"][i] = node.values
        return cls(buf)

    @classmethod
    def empty(cls, dims, background: float = 0.0) -> "FrozenGrid":
        return cls.from_builder(SparseGridBuilder(dims, background))

    # -- header --------------------------------------------------------------

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.header["dims"])

    @property
    def background(self) -> float:
        return float(self.header["background"])

    @property
    def value_domain(self) -> tuple[float, float]:
        lo, hi = self.header["value_domain"]
        return float(lo), float(hi)

    @property
    def voxel_type(self) -> int:
        return int(self.header["voxel_type"])

    @property
    def counts(self) -> dict[str, int]:
        n_upper, n_lower, n_leaf, n_root = (int(c) for c in self.header["counts"])
        return {"upper": n_upper, "lower": n_lower, "leaf": n_leaf, "root": n_root}

    @property
    def byte_size(self) -> int:
        return int(self.buffer.size)

    @property
    def active_voxel_count(self) -> int:
        """Active voxels including those covered by tiles."""
        n = int(_unbits(self.leaves["mask"]).sum()) if len(self.leaves) else 0
        if len(self.lower):
            n += int(_unbits(self.lower["tile_mask"]).sum()) * LEAF_VOXELS
        if len(self.upper):
            n += int(_unbits(self.upper["tile_mask"]).sum()) * LEAF_VOXELS * LOWER_SLOTS
        return n

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        return self.buffer.tobytes()

    def write(self, path: str | os.PathLike) -> None:
        Path(path).write_bytes(self.to_bytes())

    # -- reads ---------------------------------------------------------------

    @property
    def kernel_args(self) -> tuple:
        """Flat views consumed by the compiled lookup routines.

        ``(dims, background, root_keys, root_index, u32, f32, u64, offsets)``
        where the three typed views alias the whole buffer and ``offsets``
        holds the byte offsets of the upper, lower and leaf sections.
        """
        if self._kernel_args is None:
            n_root = len(self.root)
            upper_off = HEADER_BYTES + n_root * ROOT_DTYPE.itemsize
            lower_off = upper_off + len(self.upper) * UPPER_DTYPE.itemsize
            leaf_off = lower_off + len(self.lower) * LOWER_DTYPE.itemsize
            self._kernel_args = (
                np.array(self.dims, dtype=np.int64),
                float(np.float32(self.background)),
                self.root_keys,
                np.asarray(self.root["index"], dtype=np.int64),
                self.buffer.view(np.uint32),
                self.buffer.view(np.float32),
                self.buffer.view(np.uint64),
                np.array([upper_off, lower_off, leaf_off], dtype=np.int64),
            )
        return self._kernel_args

    def read_voxel(self, ijk) -> float:
        x, y, z = (int(c) for c in ijk)
        return float(read_uncached(self.kernel_args, x, y, z))

    def read_many(self, ijk: NDArray) -> NDArray[np.float64]:
        ijk = np.ascontiguousarray(np.asarray(ijk, dtype=np.int64).reshape(-1, 3))
        return _read_many(self.kernel_args, ijk)

    def to_dense(self) -> NDArray[np.float32]:
        """Decode every voxel into an ``[x, y, z]`` float32 array."""
        w, h, d = self.dims
        out = np.empty((d, h, w), dtype=np.float32)
        _decode_dense(self.kernel_args, out)
        return out.transpose(2, 1, 0)

    def accessor(self) -> "Accessor":
        return Accessor(self)


class Accessor:
    """Per-thread read handle caching the last visited upper/lower/leaf path."""

    def __init__(self, grid: FrozenGrid):
        self.grid = grid
        self._args = grid.kernel_args
        self.cache = new_cache()

    def read(self, ijk) -> float:
        x, y, z = (int(c) for c in ijk)
        return float(read_cached(self._args, self.cache, x, y, z))


def read_frozen(path: str | os.PathLike) -> FrozenGrid:
    return FrozenGrid(Path(path).read_bytes())


def write_frozen(grid: FrozenGrid, path: str | os.PathLike) -> None:
    grid.write(path)


# -- compiled lookups --------------------------------------------------------
# cache layout: [upper ox, oy, oz, index, lower ox, oy, oz, index, leaf ox, oy, oz, index]


def new_cache() -> NDArray[np.int64]:
    return np.full(12, -1, dtype=np.int64)


_UPPER_REC = UPPER_DTYPE.itemsize
_LOWER_REC = LOWER_DTYPE.itemsize
_LEAF_REC = LEAF_DTYPE.itemsize


@njit(nogil=True, cache=True)
def _bit(u64, word_base, slot):
    return (u64[word_base + (slot >> 6)] >> np.uint64(slot & 63)) & np.uint64(1) != 0


@njit(nogil=True, cache=True)
def _leaf_value(g, f, x, y, z):
    base = (g[7][2] + f * _LEAF_REC + 16 + 64) >> 2
    return np.float64(g[5][base + ((x & 7) | ((y & 7) << 3) | ((z & 7) << 6))])


@njit(nogil=True, cache=True)
def _from_lower(g, cache, l, x, y, z):
    base = g[7][1] + l * _LOWER_REC + 16
    slot = ((x >> 3) & 15) | (((y >> 3) & 15) << 4) | (((z >> 3) & 15) << 8)
    masks = (base + 4 * 4096) >> 3
    if _bit(g[6], masks, slot):
        f = np.int64(g[4][(base >> 2) + slot])
        cache[8] = x & ~7
        cache[9] = y & ~7
        cache[10] = z & ~7
        cache[11] = f
        return _leaf_value(g, f, x, y, z)
    if _bit(g[6], masks + 64, slot):
        return np.float64(g[5][(base >> 2) + slot])
    return g[1]


@njit(nogil=True, cache=True)
def _from_upper(g, cache, u, x, y, z):
    base = g[7][0] + u * _UPPER_REC + 16
    slot = ((x >> 7) & 31) | (((y >> 7) & 31) << 5) | (((z >> 7) & 31) << 10)
    masks = (base + 4 * 32768) >> 3
    if _bit(g[6], masks, slot):
        l = np.int64(g[4][(base >> 2) + slot])
        cache[4] = x & ~127
        cache[5] = y & ~127
        cache[6] = z & ~127
        cache[7] = l
        return _from_lower(g, cache, l, x, y, z)
    if _bit(g[6], masks + 512, slot):
        return np.float64(g[5][(base >> 2) + slot])
    return g[1]


@njit(nogil=True, cache=True)
def _find_root(keys, key):
    lo = 0
    hi = keys.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys.shape[0] and keys[lo] == key:
        return lo
    return -1


@njit(nogil=True, cache=True)
def read_cached(g, cache, x, y, z):
    """Voxel value at integer (x, y, z); background when absent or out of bounds."""
    dims = g[0]
    bg = g[1]
    if x < 0 or y < 0 or z < 0 or x >= dims[0] or y >= dims[1] or z >= dims[2]:
        return bg
    if cache[11] >= 0 and cache[8] == (x & ~7) and cache[9] == (y & ~7) and cache[10] == (z & ~7):
        return _leaf_value(g, cache[11], x, y, z)
    if cache[7] >= 0 and cache[4] == (x & ~127) and cache[5] == (y & ~127) and cache[6] == (z & ~127):
        return _from_lower(g, cache, cache[7], x, y, z)
    if cache[3] >= 0 and cache[0] == (x & ~4095) and cache[1] == (y & ~4095) and cache[2] == (z & ~4095):
        return _from_upper(g, cache, cache[3], x, y, z)
    bias = np.int64(1 << 20)
    key = (((z >> 12) + bias) << 42) | (((y >> 12) + bias) << 21) | ((x >> 12) + bias)
    r = _find_root(g[2], key)
    if r < 0:
        return bg
    u = g[3][r]
    cache[0] = x & ~4095
    cache[1] = y & ~4095
    cache[2] = z & ~4095
    cache[3] = u
    return _from_upper(g, cache, u, x, y, z)


@njit(nogil=True, cache=True)
def read_uncached(g, x, y, z):
    cache = np.full(12, -1, dtype=np.int64)
    return read_cached(g, cache, x, y, z)


@njit(nogil=True, cache=True)
def _read_many(g, ijk):
    out = np.empty(ijk.shape[0], dtype=np.float64)
    cache = np.full(12, -1, dtype=np.int64)
    for n in range(ijk.shape[0]):
        out[n] = read_cached(g, cache, ijk[n, 0], ijk[n, 1], ijk[n, 2])
    return out


@njit(nogil=True, cache=True)
def _decode_dense(g, out):
    cache = np.full(12, -1, dtype=np.int64)
    d, h, w = out.shape
    for z in range(d):
        for y in range(h):
            for x in range(w):
                out[z, y, x] = read_cached(g, cache, x, y, z)
