"""Jit-compiled per-tile render kernels.

Every helper here mirrors the arithmetic of its scalar counterpart in
volume.py / transfer.py / raycast.py operation for operation, so a frame
rendered through these kernels is bit-identical to tracing each pixel with
the library functions.  Keep the two sides in sync.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

TILE = 32


@njit(cache=True)
def trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz):
    fx = (px - ox) / dx
    fy = (py - oy) / dy
    fz = (pz - oz) / dz
    if not (0.0 <= fx <= nx - 1 and 0.0 <= fy <= ny - 1 and 0.0 <= fz <= nz - 1):
        return False, 0.0
    i = int(fx)
    j = int(fy)
    k = int(fz)
    tx = fx - i
    ty = fy - j
    tz = fz - k
    i1 = min(i + 1, nx - 1)
    j1 = min(j + 1, ny - 1)
    k1 = min(k + 1, nz - 1)
    row00 = nx * (j + ny * k)
    row10 = nx * (j1 + ny * k)
    row01 = nx * (j + ny * k1)
    row11 = nx * (j1 + ny * k1)
    c00 = vol[i + row00] + tx * (vol[i1 + row00] - vol[i + row00])
    c10 = vol[i + row10] + tx * (vol[i1 + row10] - vol[i + row10])
    c01 = vol[i + row01] + tx * (vol[i1 + row01] - vol[i + row01])
    c11 = vol[i + row11] + tx * (vol[i1 + row11] - vol[i + row11])
    c0 = c00 + ty * (c10 - c00)
    c1 = c01 + ty * (c11 - c01)
    return True, c0 + tz * (c1 - c0)


@njit(cache=True)
def classify_tf(tf_s, tf_r, tf_g, tf_b, tf_a, s):
    n = tf_s.shape[0]
    if s <= tf_s[0]:
        return tf_r[0], tf_g[0], tf_b[0], tf_a[0]
    if s >= tf_s[n - 1]:
        return tf_r[n - 1], tf_g[n - 1], tf_b[n - 1], tf_a[n - 1]
    i = 0
    while tf_s[i + 1] <= s:
        i += 1
    f = (s - tf_s[i]) / (tf_s[i + 1] - tf_s[i])
    return (
        tf_r[i] * (1.0 - f) + tf_r[i + 1] * f,
        tf_g[i] * (1.0 - f) + tf_g[i + 1] * f,
        tf_b[i] * (1.0 - f) + tf_b[i + 1] * f,
        tf_a[i] * (1.0 - f) + tf_a[i + 1] * f,
    )


@njit(cache=True)
def pixel_ray(cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
              half_w, half_h, persp, px, py, width, height):
    u = (2.0 * (px + 0.5) / width - 1.0) * half_w
    v = (1.0 - 2.0 * (py + 0.5) / height) * half_h
    if persp:
        dx = fx + u * rx + v * ux
        dy = fy + u * ry + v * uy
        dz = fz + u * rz + v * uz
        n = math.sqrt(dx * dx + dy * dy + dz * dz)
        return cpx, cpy, cpz, dx / n, dy / n, dz / n
    return cpx + u * rx + v * ux, cpy + u * ry + v * uy, cpz + u * rz + v * uz, fx, fy, fz


@njit(cache=True)
def slab(ox, oy, oz, dx, dy, dz, bx0, by0, bz0, bx1, by1, bz1):
    tn = -math.inf
    tf = math.inf
    if dx == 0.0:
        if ox < bx0 or ox > bx1:
            return False, 0.0, 0.0
    else:
        t0 = (bx0 - ox) / dx
        t1 = (bx1 - ox) / dx
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tn:
            tn = t0
        if t1 < tf:
            tf = t1
    if dy == 0.0:
        if oy < by0 or oy > by1:
            return False, 0.0, 0.0
    else:
        t0 = (by0 - oy) / dy
        t1 = (by1 - oy) / dy
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tn:
            tn = t0
        if t1 < tf:
            tf = t1
    if dz == 0.0:
        if oz < bz0 or oz > bz1:
            return False, 0.0, 0.0
    else:
        t0 = (bz0 - oz) / dz
        t1 = (bz1 - oz) / dz
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tn:
            tn = t0
        if t1 < tf:
            tf = t1
    if tn > tf or tf < 0.0:
        return False, 0.0, 0.0
    return True, max(tn, 0.0), tf


@njit(cache=True)
def gradient(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz):
    bx1 = ox + (nx - 1) * dx
    by1 = oy + (ny - 1) * dy
    bz1 = oz + (nz - 1) * dz
    _, f0 = trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz)
    gx = gy = gz = 0.0
    for a in range(3):
        if a == 0:
            h, c, lo_b, hi_b = dx, px, ox, bx1
        elif a == 1:
            h, c, lo_b, hi_b = dy, py, oy, by1
        else:
            h, c, lo_b, hi_b = dz, pz, oz, bz1
        lo_c = c - h
        hi_c = c + h
        lo_in = lo_c >= lo_b
        hi_in = hi_c <= hi_b
        if lo_in and hi_in:
            _, vh = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, hi_c)
            _, vl = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, lo_c)
            g = (vh - vl) / (2.0 * h)
        elif hi_in:
            _, vh = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, hi_c)
            g = (vh - f0) / h
        elif lo_in:
            _, vl = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, lo_c)
            g = (f0 - vl) / h
        else:
            _, vh = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, hi_b)
            _, vl = _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, a, lo_b)
            g = (vh - vl) / (hi_b - lo_b)
        if a == 0:
            gx = g
        elif a == 1:
            gy = g
        else:
            gz = g
    return gx, gy, gz


@njit(cache=True)
def _axis_eval(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, pz, axis, coord):
    if axis == 0:
        return trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, coord, py, pz)
    if axis == 1:
        return trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, coord, pz)
    return trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, px, py, coord)


@njit(cache=True, parallel=True)
def render_composite(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                     cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                     half_w, half_h, persp, width, height,
                     tf_s, tf_r, tf_g, tf_b, tf_a,
                     step, ref_step, term_alpha, bg_r, bg_g, bg_b,
                     out, nsamp, early):
    bx1 = ox + (nx - 1) * dx
    by1 = oy + (ny - 1) * dy
    bz1 = oz + (nz - 1) * dz
    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    for tile in prange(ntx * nty):
        x0 = (tile % ntx) * TILE
        y0 = (tile // ntx) * TILE
        for py in range(y0, min(y0 + TILE, height)):
            for px in range(x0, min(x0 + TILE, width)):
                rox, roy, roz, rdx, rdy, rdz = pixel_ray(
                    cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                    half_w, half_h, persp, px, py, width, height)
                hit, t0, t1 = slab(rox, roy, roz, rdx, rdy, rdz, ox, oy, oz, bx1, by1, bz1)
                cr = cg = cb = 0.0
                acc = 0.0
                taken = 0
                was_early = False
                if hit:
                    k = 0
                    while True:
                        t = t0 + (k + 0.5) * step
                        if t > t1:
                            break
                        k += 1
                        ok, s = trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                                          rox + t * rdx, roy + t * rdy, roz + t * rdz)
                        if not ok:
                            continue
                        r, g, b, a = classify_tf(tf_s, tf_r, tf_g, tf_b, tf_a, s)
                        a = 1.0 - (1.0 - a) ** (step / ref_step)
                        w = (1.0 - acc) * a
                        cr += w * r
                        cg += w * g
                        cb += w * b
                        acc += w
                        taken += 1
                        if acc >= term_alpha:
                            was_early = True
                            break
                out[py, px, 0] = cr + (1.0 - acc) * bg_r
                out[py, px, 1] = cg + (1.0 - acc) * bg_g
                out[py, px, 2] = cb + (1.0 - acc) * bg_b
                out[py, px, 3] = acc
                nsamp[py, px] = taken
                early[py, px] = 1 if was_early else 0


@njit(cache=True, parallel=True)
def render_scalar_mode(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                       cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                       half_w, half_h, persp, width, height,
                       tf_s, tf_r, tf_g, tf_b, tf_a,
                       step, mode, threshold, bg_r, bg_g, bg_b,
                       out, nsamp, early):
    # mode: 0 = mip, 1 = average, 2 = threshold
    bx1 = ox + (nx - 1) * dx
    by1 = oy + (ny - 1) * dy
    bz1 = oz + (nz - 1) * dz
    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    for tile in prange(ntx * nty):
        x0 = (tile % ntx) * TILE
        y0 = (tile // ntx) * TILE
        for py in range(y0, min(y0 + TILE, height)):
            for px in range(x0, min(x0 + TILE, width)):
                rox, roy, roz, rdx, rdy, rdz = pixel_ray(
                    cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                    half_w, half_h, persp, px, py, width, height)
                hit, t0, t1 = slab(rox, roy, roz, rdx, rdy, rdz, ox, oy, oz, bx1, by1, bz1)
                taken = 0
                best = -1.0
                total = 0.0
                found = False
                out_s = 0.0
                if hit:
                    k = 0
                    while True:
                        t = t0 + (k + 0.5) * step
                        if t > t1:
                            break
                        k += 1
                        ok, s = trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                                          rox + t * rdx, roy + t * rdy, roz + t * rdz)
                        if not ok:
                            continue
                        taken += 1
                        if mode == 0:
                            if s > best:
                                best = s
                            found = True
                        elif mode == 1:
                            total += s
                            found = True
                        else:
                            if s >= threshold:
                                out_s = s
                                found = True
                                break
                if not found:
                    out[py, px, 0] = bg_r
                    out[py, px, 1] = bg_g
                    out[py, px, 2] = bg_b
                    out[py, px, 3] = 0.0
                else:
                    if mode == 0:
                        out_s = best
                    elif mode == 1:
                        out_s = total / taken
                    r, g, b, a = classify_tf(tf_s, tf_r, tf_g, tf_b, tf_a, out_s)
                    out[py, px, 0] = r
                    out[py, px, 1] = g
                    out[py, px, 2] = b
                    out[py, px, 3] = 1.0
                nsamp[py, px] = taken
                early[py, px] = 0


@njit(cache=True, parallel=True)
def render_isosurface(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                      cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                      half_w, half_h, persp, width, height,
                      tf_s, tf_r, tf_g, tf_b, tf_a,
                      step, iso, bis_iters, shaded, bg_r, bg_g, bg_b,
                      out, nsamp, early):
    bx1 = ox + (nx - 1) * dx
    by1 = oy + (ny - 1) * dy
    bz1 = oz + (nz - 1) * dz
    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    for tile in prange(ntx * nty):
        x0 = (tile % ntx) * TILE
        y0 = (tile // ntx) * TILE
        for py in range(y0, min(y0 + TILE, height)):
            for px in range(x0, min(x0 + TILE, width)):
                rox, roy, roz, rdx, rdy, rdz = pixel_ray(
                    cpx, cpy, cpz, fx, fy, fz, rx, ry, rz, ux, uy, uz,
                    half_w, half_h, persp, px, py, width, height)
                hit, t0, t1 = slab(rox, roy, roz, rdx, rdy, rdz, ox, oy, oz, bx1, by1, bz1)
                taken = 0
                have_prev = False
                ps = 0.0
                pt = 0.0
                hit_t = -1.0
                if hit:
                    k = 0
                    while True:
                        t = t0 + (k + 0.5) * step
                        if t > t1:
                            break
                        k += 1
                        ok, s = trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                                          rox + t * rdx, roy + t * rdy, roz + t * rdz)
                        if not ok:
                            continue
                        taken += 1
                        if have_prev and (ps - iso) * (s - iso) <= 0.0:
                            lo = pt
                            hi = t
                            g_lo = ps - iso
                            for _ in range(bis_iters):
                                mid = 0.5 * (lo + hi)
                                ok2, v = trilinear(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz,
                                                   rox + mid * rdx, roy + mid * rdy, roz + mid * rdz)
                                if not ok2:
                                    break
                                g_mid = v - iso
                                if (g_lo <= 0.0) == (g_mid <= 0.0):
                                    lo = mid
                                    g_lo = g_mid
                                else:
                                    hi = mid
                            hit_t = 0.5 * (lo + hi)
                            break
                        have_prev = True
                        ps = s
                        pt = t
                if hit_t < 0.0:
                    out[py, px, 0] = bg_r
                    out[py, px, 1] = bg_g
                    out[py, px, 2] = bg_b
                    out[py, px, 3] = 0.0
                else:
                    r, g, b, a = classify_tf(tf_s, tf_r, tf_g, tf_b, tf_a, iso)
                    if shaded:
                        hx = rox + hit_t * rdx
                        hy = roy + hit_t * rdy
                        hz = roz + hit_t * rdz
                        if (ox <= hx <= bx1) and (oy <= hy <= by1) and (oz <= hz <= bz1):
                            gx, gy, gz = gradient(vol, nx, ny, nz, ox, oy, oz, dx, dy, dz, hx, hy, hz)
                            gl = math.sqrt(gx * gx + gy * gy + gz * gz)
                            if gl != 0.0:
                                d = (gx * rdx + gy * rdy + gz * rdz) / gl
                                f = 0.1 + 0.9 * max(0.0, d)
                                r = r * f
                                g = g * f
                                b = b * f
                    out[py, px, 0] = r
                    out[py, px, 1] = g
                    out[py, px, 2] = b
                    out[py, px, 3] = 1.0
                nsamp[py, px] = taken
                early[py, px] = 0


def warmup():
    """Force-compile all kernels on a 2x2x2 volume and a 2x2 frame."""
    vol = np.zeros(8, dtype=np.float64)
    tf = np.array([0.0, 1.0])
    out = np.zeros((2, 2, 4), dtype=np.float64)
    nsamp = np.zeros((2, 2), dtype=np.int64)
    early = np.zeros((2, 2), dtype=np.uint8)
    args = (vol, 2, 2, 2, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0,
            0.5, 0.5, 5.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0,
            1.0, 1.0, True, 2, 2,
            tf, tf, tf, tf, tf)
    render_composite(*args, 0.5, 1.0, 0.999, 0.0, 0.0, 0.0, out, nsamp, early)
    render_scalar_mode(*args, 0.5, 0, 0.5, 0.0, 0.0, 0.0, out, nsamp, early)
    render_isosurface(*args, 0.5, 0.5, 8, True, 0.0, 0.0, 0.0, out, nsamp, early)
