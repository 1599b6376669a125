"""3D-DDA over a uniform cell grid spanning ``[0, n * cell_size)`` per axis.

The stepper keeps its state in a small float64 array so it can be driven from
compiled kernels and from Python alike.
"""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np
from numba import njit

# state: t, t_end, cell[3], step[3], t_max[3], t_delta[3], done
STATE_SIZE = 15


@njit(nogil=True, cache=True)
def clip_box(ox, oy, oz, dx, dy, dz, bx, by, bz, t0, t1):
    """Clip the parametric range [t0, t1] to the box [0, b]; returns (t_enter, t_exit)."""
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    b = (bx, by, bz)
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < 0.0 or o[a] > b[a]:
                return 1.0, 0.0
        else:
            ta = (0.0 - o[a]) / d[a]
            tb = (b[a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    return t0, t1


@njit(nogil=True, cache=True)
def dda_setup(state, ox, oy, oz, dx, dy, dz, t0, t1, cell_size, ncells):
    """Initialise ``state``; returns False when the segment misses the grid."""
    t_in, t_out = clip_box(ox, oy, oz, dx, dy, dz, ncells[0] * cell_size, ncells[1] * cell_size,
                           ncells[2] * cell_size, t0, t1)
    if not t_in < t_out:
        state[14] = 1.0
        return False
    state[0] = t_in
    state[1] = t_out
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for a in range(3):
        p = o[a] + d[a] * t_in
        c = math.floor(p / cell_size)
        c = min(max(c, 0.0), ncells[a] - 1.0)
        state[2 + a] = c
        if d[a] > 0.0:
            state[5 + a] = 1.0
            state[8 + a] = ((c + 1.0) * cell_size - o[a]) / d[a]
            state[11 + a] = cell_size / d[a]
        elif d[a] < 0.0:
            state[5 + a] = -1.0
            state[8 + a] = (c * cell_size - o[a]) / d[a]
            state[11 + a] = -cell_size / d[a]
        else:
            state[5 + a] = 0.0
            state[8 + a] = np.inf
            state[11 + a] = np.inf
    state[14] = 0.0
    return True


@njit(nogil=True, cache=True)
def dda_next(state, ncells):
    """Emit the current cell as (ok, cx, cy, cz, t_enter, t_exit) and advance."""
    if state[14] != 0.0:
        return False, 0, 0, 0, 0.0, 0.0
    cx = np.int64(state[2])
    cy = np.int64(state[3])
    cz = np.int64(state[4])
    ta = state[0]
    axis = 0
    if state[9] < state[8 + axis]:
        axis = 1
    if state[10] < state[8 + axis]:
        axis = 2
    tb = min(state[8 + axis], state[1])
    if tb < ta:
        tb = ta
    if tb >= state[1]:
        state[14] = 1.0
    else:
        c = state[2 + axis] + state[5 + axis]
        if c < 0.0 or c >= ncells[axis]:
            state[14] = 1.0
        state[2 + axis] = c
        state[8 + axis] += state[11 + axis]
        state[0] = tb
    return True, cx, cy, cz, ta, tb


def dda_traverse(ncells, cell_size: float, origin, direction,
                 t_range=(0.0, math.inf)) -> Iterator[tuple[tuple[int, int, int], float, float]]:
    """Yield ``(cell, t_enter, t_exit)`` for every cell the segment crosses, in order.

    Stop iterating to terminate early.
    """
    ncells = np.asarray(ncells, dtype=np.int64)
    state = np.zeros(STATE_SIZE, dtype=np.float64)
    o = [float(c) for c in origin]
    d = [float(c) for c in direction]
    if d == [0.0, 0.0, 0.0]:
        raise ValueError("direction must be non-zero")
    if not dda_setup(state, *o, *d, float(t_range[0]), float(t_range[1]), float(cell_size), ncells):
        return
    while True:
        ok, cx, cy, cz, ta, tb = dda_next(state, ncells)
        if not ok:
            return
        yield (int(cx), int(cy), int(cz)), float(ta), float(tb)
