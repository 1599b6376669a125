"""Mutable four-level {5,4,3} sparse voxel tree.

Root -> upper nodes (32^3 slots, 4096^3 voxels) -> lower nodes (16^3 slots,
128^3 voxels) -> leaves (8^3 voxels). Slots of the internal nodes are either
empty, a child, or an active constant tile. Slot and voxel offsets are x
fastest: ``lx + dim * (ly + dim * lz)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import Misaligned, OutOfBounds

LOG2_LEAF = 3
LOG2_LOWER = 4
LOG2_UPPER = 5

LEAF_DIM = 1 << LOG2_LEAF  # voxels per leaf axis
LOWER_DIM = 1 << LOG2_LOWER  # slots per lower-node axis
UPPER_DIM = 1 << LOG2_UPPER  # slots per upper-node axis

LEAF_SPAN = LEAF_DIM  # 8
LOWER_SPAN = LEAF_SPAN * LOWER_DIM  # 128
UPPER_SPAN = LOWER_SPAN * UPPER_DIM  # 4096

LEAF_VOXELS = LEAF_DIM**3
LOWER_SLOTS = LOWER_DIM**3
UPPER_SLOTS = UPPER_DIM**3


@dataclass(frozen=True)
class TreeConfig:
    log2_leaf: int = LOG2_LEAF
    log2_lower: int = LOG2_LOWER
    log2_upper: int = LOG2_UPPER

    @property
    def leaf_span(self) -> int:
        return 1 << self.log2_leaf

    @property
    def lower_span(self) -> int:
        return 1 << (self.log2_leaf + self.log2_lower)

    @property
    def upper_span(self) -> int:
        return 1 << (self.log2_leaf + self.log2_lower + self.log2_upper)


def _origin(ijk, span: int) -> tuple[int, int, int]:
    return tuple(int(c) & ~(span - 1) for c in ijk)


def _slot(ijk, child_span: int, dim: int) -> int:
    x, y, z = ((int(c) // child_span) & (dim - 1) for c in ijk)
    return x + dim * (y + dim * z)


def _slot_origin(node_origin, slot: int, child_span: int, dim: int) -> tuple[int, int, int]:
    x = slot % dim
    y = (slot // dim) % dim
    z = slot // (dim * dim)
    return (node_origin[0] + x * child_span, node_origin[1] + y * child_span, node_origin[2] + z * child_span)


class Leaf:
    __slots__ = ("origin", "values", "mask")

    def __init__(self, origin, background: float, fill: float | None = None):
        self.origin = origin
        self.values = np.full(LEAF_VOXELS, background if fill is None else fill, dtype=np.float32)
        self.mask = np.full(LEAF_VOXELS, fill is not None, dtype=bool)

    @staticmethod
    def offset(ijk) -> int:
        x, y, z = (int(c) & (LEAF_DIM - 1) for c in ijk)
        return x + LEAF_DIM * (y + LEAF_DIM * z)

    def block(self) -> NDArray[np.float32]:
        """``[x, y, z]`` view of the value array."""
        return self.values.reshape(LEAF_DIM, LEAF_DIM, LEAF_DIM).transpose(2, 1, 0)

    def mask_block(self) -> NDArray[np.bool_]:
        return self.mask.reshape(LEAF_DIM, LEAF_DIM, LEAF_DIM).transpose(2, 1, 0)


class InternalNode:
    __slots__ = ("origin", "dim", "child_span", "children", "tiles")

    def __init__(self, origin, dim: int, child_span: int):
        self.origin = origin
        self.dim = dim
        self.child_span = child_span
        self.children: dict[int, "InternalNode | Leaf"] = {}
        self.tiles: dict[int, float] = {}

    @property
    def span(self) -> int:
        return self.dim * self.child_span


@dataclass(frozen=True)
class PruneStats:
    leaves_removed: int
    leaves_collapsed: int
    lower_collapsed: int


class SparseGridBuilder:
    """Single-writer mutable tree; ``freeze`` it for sampling."""

    def __init__(self, dims, background: float = 0.0, value_domain=None, voxel_type: int = 1):
        self.dims = tuple(int(n) for n in dims)
        self.background = float(np.float32(background))
        self.value_domain = tuple(value_domain) if value_domain is not None else (self.background, self.background)
        self.voxel_type = int(voxel_type)
        self.config = TreeConfig()
        self.root: dict[tuple[int, int, int], InternalNode] = {}

    def _check_bounds(self, ijk):
        if not all(0 <= c < n for c, n in zip(ijk, self.dims)):
            raise OutOfBounds(f"{tuple(ijk)} outside {self.dims}")

    def _upper(self, ijk) -> InternalNode:
        key = _origin(ijk, UPPER_SPAN)
        node = self.root.get(key)
        if node is None:
            node = self.root[key] = InternalNode(key, UPPER_DIM, LOWER_SPAN)
        return node

    def _lower(self, ijk) -> InternalNode:
        upper = self._upper(ijk)
        slot = _slot(ijk, LOWER_SPAN, UPPER_DIM)
        node = upper.children.get(slot)
        if node is None:
            node = InternalNode(_origin(ijk, LOWER_SPAN), LOWER_DIM, LEAF_SPAN)
            if slot in upper.tiles:
                value = upper.tiles.pop(slot)
                node.tiles = dict.fromkeys(range(LOWER_SLOTS), value)
            upper.children[slot] = node
        return node

    def _leaf(self, ijk) -> Leaf:
        lower = self._lower(ijk)
        slot = _slot(ijk, LEAF_SPAN, LOWER_DIM)
        leaf = lower.children.get(slot)
        if leaf is None:
            fill = lower.tiles.pop(slot, None)
            leaf = lower.children[slot] = Leaf(_origin(ijk, LEAF_SPAN), self.background, fill)
        return leaf

    def set_voxel(self, ijk, value: float) -> None:
        self._check_bounds(ijk)
        leaf = self._leaf(ijk)
        off = Leaf.offset(ijk)
        leaf.values[off] = value
        leaf.mask[off] = True

    def set_block(self, lo, values: NDArray) -> None:
        """Activate the box starting at ``lo`` with an ``[x, y, z]`` array of values."""
        values = np.asarray(values, dtype=np.float32)
        lo = tuple(int(c) for c in lo)
        hi = tuple(c + n for c, n in zip(lo, values.shape))
        self._check_bounds(lo)
        self._check_bounds(tuple(c - 1 for c in hi))
        start = _origin(lo, LEAF_SPAN)
        for oz in range(start[2], hi[2], LEAF_SPAN):
            for oy in range(start[1], hi[1], LEAF_SPAN):
                for ox in range(start[0], hi[0], LEAF_SPAN):
                    a = (max(ox, lo[0]), max(oy, lo[1]), max(oz, lo[2]))
                    b = (min(ox + LEAF_SPAN, hi[0]), min(oy + LEAF_SPAN, hi[1]), min(oz + LEAF_SPAN, hi[2]))
                    leaf = self._leaf((ox, oy, oz))
                    dst = tuple(slice(a[i] - o, b[i] - o) for i, o in enumerate((ox, oy, oz)))
                    src = tuple(slice(a[i] - lo[i], b[i] - lo[i]) for i in range(3))
                    leaf.block()[dst] = values[src]
                    leaf.mask_block()[dst] = True

    def set_tile(self, level: str, origin, value: float) -> None:
        """Make a whole slot constant and active.

        ``level`` is ``"lower"`` for an 8^3 slot of a lower node or ``"upper"``
        for a 128^3 slot of an upper node.
        """
        origin = tuple(int(c) for c in origin)
        span = {"lower": LEAF_SPAN, "upper": LOWER_SPAN}.get(level)
        if span is None:
            raise ValueError(f"level must be 'lower' or 'upper', got {level!r}")
        if any(c % span for c in origin):
            raise Misaligned(f"{origin} is not aligned to {span}")
        self._check_bounds(origin)
        value = float(np.float32(value))
        if level == "upper":
            upper = self._upper(origin)
            slot = _slot(origin, LOWER_SPAN, UPPER_DIM)
            upper.children.pop(slot, None)
            upper.tiles[slot] = value
        else:
            lower = self._lower(origin)
            slot = _slot(origin, LEAF_SPAN, LOWER_DIM)
            lower.children.pop(slot, None)
            lower.tiles[slot] = value

    def read_voxel(self, ijk) -> float:
        if not all(0 <= c < n for c, n in zip(ijk, self.dims)):
            return self.background
        upper = self.root.get(_origin(ijk, UPPER_SPAN))
        if upper is None:
            return self.background
        slot = _slot(ijk, LOWER_SPAN, UPPER_DIM)
        if slot in upper.tiles:
            return upper.tiles[slot]
        lower = upper.children.get(slot)
        if lower is None:
            return self.background
        slot = _slot(ijk, LEAF_SPAN, LOWER_DIM)
        if slot in lower.tiles:
            return lower.tiles[slot]
        leaf = lower.children.get(slot)
        if leaf is None:
            return self.background
        return float(leaf.values[Leaf.offset(ijk)])

    def is_active(self, ijk) -> bool:
        upper = self.root.get(_origin(ijk, UPPER_SPAN))
        if upper is None:
            return False
        slot = _slot(ijk, LOWER_SPAN, UPPER_DIM)
        if slot in upper.tiles:
            return True
        lower = upper.children.get(slot)
        if lower is None:
            return False
        slot = _slot(ijk, LEAF_SPAN, LOWER_DIM)
        if slot in lower.tiles:
            return True
        leaf = lower.children.get(slot)
        return leaf is not None and bool(leaf.mask[Leaf.offset(ijk)])

    def leaf_count(self) -> int:
        return sum(len(lower.children) for upper in self.root.values() for lower in upper.children.values())

    def prune(self) -> PruneStats:
        """Collapse uniform subtrees into tiles and drop empty ones.

        Tiles equal to the background are dropped too since they read the
        same as empty slots.
        """
        removed = collapsed = lower_collapsed = 0
        bg = np.float32(self.background)
        for ukey in list(self.root):
            upper = self.root[ukey]
            for uslot in list(upper.children):
                lower = upper.children[uslot]
                for lslot in list(lower.children):
                    leaf = lower.children[lslot]
                    if not leaf.mask.any():
                        del lower.children[lslot]
                        removed += 1
                    elif leaf.mask.all() and np.all(leaf.values == leaf.values[0]):
                        del lower.children[lslot]
                        lower.tiles[lslot] = float(leaf.values[0])
                        collapsed += 1
                lower.tiles = {s: v for s, v in lower.tiles.items() if np.float32(v) != bg}
                if not lower.children and len(lower.tiles) == LOWER_SLOTS and len(set(lower.tiles.values())) == 1:
                    del upper.children[uslot]
                    upper.tiles[uslot] = next(iter(lower.tiles.values()))
                    lower_collapsed += 1
                elif not lower.children and not lower.tiles:
                    del upper.children[uslot]
            upper.tiles = {s: v for s, v in upper.tiles.items() if np.float32(v) != bg}
            if not upper.children and not upper.tiles:
                del self.root[ukey]
        return PruneStats(removed, collapsed, lower_collapsed)

    def freeze(self):
        from .frozen import FrozenGrid

        return FrozenGrid.from_builder(self)
