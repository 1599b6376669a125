"""Compiled light-transport kernels: counter-based RNG, Woodcock tracking over
macrocells, the volume path tracer and the implicit ISO-surface marcher.

A *scene* tuple bundles everything the kernels read::

    (source, tf_args, ranges, majorants, ncells, cell_size, hull)

``source`` is a sampler source (see :mod:`sparsevol.sampler`), ``hull`` the
upper corner of the medium box ``[0, dims - 1]``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..sampler import sample_at, gradient_at
from .dda import STATE_SIZE, clip_box, dda_next, dda_setup
from .transfer import tf_alpha, tf_lookup

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# settings vector layout
S_MAX_BOUNCES = 0
S_RR_START = 1
S_AMBIENT = 2  # 3 entries
S_BACKGROUND = 5  # 3 entries
S_ISO = 8
S_SKIP_EMPTY = 9
S_SAMPLE_MODE = 10
SETTINGS_SIZE = 11

ISO_STEP = 0.25
ISO_BISECTIONS = 16


@njit(nogil=True, cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(nogil=True, cache=True)
def rng_seed(rng, seed, a, b, c):
    """Set ``rng[0]`` to a stream keyed by (seed, a, b, c)."""
    h = mix64(np.uint64(seed) + _GOLDEN)
    h = mix64(h ^ (np.uint64(a) + _GOLDEN))
    h = mix64(h ^ (np.uint64(b) + _GOLDEN))
    h = mix64(h ^ (np.uint64(c) + _GOLDEN))
    rng[0] = h


@njit(nogil=True, cache=True)
def rng_uniform(rng):
    """Uniform double in [0, 1)."""
    rng[0] += _GOLDEN
    return np.float64(mix64(rng[0]) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(nogil=True, cache=True)
def woodcock_track(source, cache, tf, sigma_maj, ox, oy, oz, dx, dy, dz, ta, tb, rng, mode):
    """Delta tracking on [ta, tb) against a constant majorant.

    Returns (hit, t, scalar). A zero majorant returns a miss without
    consuming random numbers, so skipping empty cells upstream never changes
    the random stream.
    """
    if sigma_maj <= 0.0:
        return False, tb, 0.0
    t = ta
    while True:
        t -= math.log(1.0 - rng_uniform(rng)) / sigma_maj
        if t >= tb:
            return False, tb, 0.0
        v = sample_at(source, cache, ox + t * dx, oy + t * dy, oz + t * dz, mode)
        sigma_t = tf[3] * tf_alpha(tf, v)
        if rng_uniform(rng) * sigma_maj < sigma_t:
            return True, t, v


@njit(nogil=True, cache=True)
def next_event(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, rng, settings):
    """Free-flight distance along a ray through the medium, cell by cell."""
    source, tf, _, majorants, ncells, cell_size, hull = scene
    t0, t1 = clip_box(ox, oy, oz, dx, dy, dz, hull[0], hull[1], hull[2], 0.0, np.inf)
    if not t0 < t1:
        return False, 0.0, 0.0
    if not dda_setup(dda_state, ox, oy, oz, dx, dy, dz, t0, t1, cell_size, ncells):
        return False, 0.0, 0.0
    skip_empty = settings[S_SKIP_EMPTY] != 0.0
    mode = np.int64(settings[S_SAMPLE_MODE])
    while True:
        ok, cx, cy, cz, ta, tb = dda_next(dda_state, ncells)
        if not ok:
            return False, 0.0, 0.0
        sigma = majorants[cx, cy, cz]
        if skip_empty and sigma == 0.0:
            continue
        hit, t, v = woodcock_track(source, cache, tf, sigma, ox, oy, oz, dx, dy, dz, ta, tb, rng, mode)
        if hit:
            return True, t, v


@njit(nogil=True, cache=True)
def trace_path(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, rng, settings):
    """Radiance along one camera ray under constant ambient light."""
    tf = scene[1]
    tr = 1.0
    tg = 1.0
    tb = 1.0
    bounces = 0
    max_bounces = np.int64(settings[S_MAX_BOUNCES])
    rr_start = np.int64(settings[S_RR_START])
    while True:
        hit, t, v = next_event(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, rng, settings)
        if not hit:
            return (tr * settings[S_AMBIENT], tg * settings[S_AMBIENT + 1], tb * settings[S_AMBIENT + 2])
        ox += t * dx
        oy += t * dy
        oz += t * dz
        r, g, b, _ = tf_lookup(tf, v)
        tr *= r
        tg *= g
        tb *= b
        bounces += 1
        peak = max(tr, tg, tb)
        if bounces > max_bounces or peak <= 0.0:
            return (0.0, 0.0, 0.0)
        if bounces >= rr_start:
            # survival capped at 1 keeps every path weight <= 1
            survive = min(max(peak, 0.05), 1.0)
            if rng_uniform(rng) >= survive:
                return (0.0, 0.0, 0.0)
            tr /= survive
            tg /= survive
            tb /= survive
        # isotropic phase function
        cos_t = 1.0 - 2.0 * rng_uniform(rng)
        phi = 2.0 * math.pi * rng_uniform(rng)
        sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
        dx = sin_t * math.cos(phi)
        dy = sin_t * math.sin(phi)
        dz = cos_t


@njit(nogil=True, cache=True)
def iso_hit(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, iso, mode):
    """First crossing of ``iso`` along the ray; returns (hit, t).

    Cells whose range excludes ``iso`` are skipped; candidate cells are
    marched in steps of 0.25 and a sign change is refined by bisection.
    """
    source, _, ranges, _, ncells, cell_size, hull = scene
    t0, t1 = clip_box(ox, oy, oz, dx, dy, dz, hull[0], hull[1], hull[2], 0.0, np.inf)
    if not t0 < t1:
        return False, 0.0
    if not dda_setup(dda_state, ox, oy, oz, dx, dy, dz, t0, t1, cell_size, ncells):
        return False, 0.0
    have_prev = False
    tp = 0.0
    fp = 0.0
    while True:
        ok, cx, cy, cz, ta, tb = dda_next(dda_state, ncells)
        if not ok:
            return False, 0.0
        if iso < ranges[cx, cy, cz, 0] or iso > ranges[cx, cy, cz, 1]:
            have_prev = False
            continue
        if not have_prev:
            tp = ta
            fp = sample_at(source, cache, ox + tp * dx, oy + tp * dy, oz + tp * dz, mode) - iso
            have_prev = True
        while tp < tb:
            tn = min(tp + ISO_STEP, tb)
            fn = sample_at(source, cache, ox + tn * dx, oy + tn * dy, oz + tn * dz, mode) - iso
            if (fp < 0.0) != (fn < 0.0):
                a = tp
                b = tn
                fa = fp
                for _ in range(ISO_BISECTIONS):
                    m = 0.5 * (a + b)
                    fm = sample_at(source, cache, ox + m * dx, oy + m * dy, oz + m * dz, mode) - iso
                    if (fa < 0.0) != (fm < 0.0):
                        b = m
                    else:
                        a = m
                        fa = fm
                return True, 0.5 * (a + b)
            tp = tn
            fp = fn


@njit(nogil=True, cache=True)
def trace_iso(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, settings):
    """Absolute-value normal color at the ISO hit, background on a miss."""
    mode = np.int64(settings[S_SAMPLE_MODE])
    hit, t = iso_hit(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, settings[S_ISO], mode)
    if not hit:
        return (settings[S_BACKGROUND], settings[S_BACKGROUND + 1], settings[S_BACKGROUND + 2])
    gx, gy, gz = gradient_at(scene[0], cache, ox + t * dx, oy + t * dy, oz + t * dz)
    norm = math.sqrt(gx * gx + gy * gy + gz * gz)
    if norm == 0.0:
        return (0.0, 0.0, 0.0)
    return (abs(gx) / norm, abs(gy) / norm, abs(gz) / norm)


@njit(nogil=True, cache=True)
def camera_ray(cam, px, py, jx, jy, width, height):
    """Pinhole ray through pixel (px + jx, py + jy); row 0 is the top."""
    tan_half = cam[12]
    aspect = width / height
    sx = (2.0 * (px + jx) / width - 1.0) * tan_half * aspect
    sy = (1.0 - 2.0 * (py + jy) / height) * tan_half
    dx = cam[3] + sx * cam[6] + sy * cam[9]
    dy = cam[4] + sx * cam[7] + sy * cam[10]
    dz = cam[5] + sx * cam[8] + sy * cam[11]
    n = math.sqrt(dx * dx + dy * dy + dz * dz)
    return cam[0], cam[1], cam[2], dx / n, dy / n, dz / n


@njit(nogil=True, cache=True)
def render_tile(scene, cam, settings, seed, spp, iso_mode, x0, y0, x1, y1, image):
    """Accumulate mean radiance for pixels [x0, x1) x [y0, y1) into ``image``."""
    height, width = image.shape[0], image.shape[1]
    cache = np.full(12, -1, dtype=np.int64)
    dda_state = np.zeros(STATE_SIZE, dtype=np.float64)
    rng = np.zeros(1, dtype=np.uint64)
    for py in range(y0, y1):
        for px in range(x0, x1):
            if iso_mode:
                ox, oy, oz, dx, dy, dz = camera_ray(cam, px, py, 0.5, 0.5, width, height)
                r, g, b = trace_iso(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, settings)
                image[py, px, 0] = r
                image[py, px, 1] = g
                image[py, px, 2] = b
                continue
            ar = 0.0
            ag = 0.0
            ab = 0.0
            for s in range(spp):
                rng_seed(rng, seed, px, py, s)
                jx = rng_uniform(rng)
                jy = rng_uniform(rng)
                ox, oy, oz, dx, dy, dz = camera_ray(cam, px, py, jx, jy, width, height)
                r, g, b = trace_path(scene, cache, dda_state, ox, oy, oz, dx, dy, dz, rng, settings)
                ar += r
                ag += g
                ab += b
            image[py, px, 0] = ar / spp
            image[py, px, 1] = ag / spp
            image[py, px, 2] = ab / spp


@njit(nogil=True, cache=True)
def free_flights(source, tf, sigma_maj, origins, directions, ta, tb, seed, mode):
    """Batch Woodcock tracking; ``inf`` marks rays with no event in [ta, tb)."""
    n = origins.shape[0]
    out = np.empty(n, dtype=np.float64)
    cache = np.full(12, -1, dtype=np.int64)
    rng = np.zeros(1, dtype=np.uint64)
    for i in range(n):
        rng_seed(rng, seed, i, 0, 0)
        hit, t, _ = woodcock_track(source, cache, tf, sigma_maj, origins[i, 0], origins[i, 1], origins[i, 2],
                                   directions[i, 0], directions[i, 1], directions[i, 2], ta, tb, rng, mode)
        out[i] = t if hit else np.inf
    return out
