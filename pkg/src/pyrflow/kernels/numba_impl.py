"""Numba-compiled kernels. Same contracts as numpy_impl, loop form.

conv2d accumulates float32 with a fixed channel -> kernel-row -> kernel-col
order; the interpolating kernels accumulate their few terms in float64 and
round once to float32.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def conv2d(inp, ker, bias, stride, pad):
    # tap-by-tap accumulation: per output element the add order is still
    # bias, then (ci, ky, kx) lexicographic, but rows are walked
    # contiguously and the tap weight is hoisted out of the pixel loops
    c_in, h, w = inp.shape
    c_out, _, kh, kw = ker.shape
    h_out = (h + 2 * pad - kh) // stride + 1
    w_out = (w + 2 * pad - kw) // stride + 1
    out = np.empty((c_out, h_out, w_out), dtype=np.float32)
    for co in range(c_out):
        out[co, :, :] = bias[co]
    for co in range(c_out):
        for ci in range(c_in):
            for ky in range(kh):
                oy_lo = 0
                while oy_lo < h_out and oy_lo * stride + ky - pad < 0:
                    oy_lo += 1
                oy_hi = h_out
                while oy_hi > oy_lo and (oy_hi - 1) * stride + ky - pad >= h:
                    oy_hi -= 1
                for kx in range(kw):
                    wv = ker[co, ci, ky, kx]
                    ox_lo = 0
                    while ox_lo < w_out and ox_lo * stride + kx - pad < 0:
                        ox_lo += 1
                    ox_hi = w_out
                    while ox_hi > ox_lo and (ox_hi - 1) * stride + kx - pad >= w:
                        ox_hi -= 1
                    for oy in range(oy_lo, oy_hi):
                        row = inp[ci, oy * stride + ky - pad]
                        dst = out[co, oy]
                        for ox in range(ox_lo, ox_hi):
                            dst[ox] += wv * row[ox * stride + kx - pad]
    return out


@njit(inline="always")
def _bilinear_one(plane, x, y, h, w):
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    fx = x - x0
    fy = y - y0
    acc = 0.0
    if 0 <= y0 < h and 0 <= x0 < w:
        acc += (1.0 - fx) * (1.0 - fy) * plane[y0, x0]
    if 0 <= y0 < h and 0 <= x0 + 1 < w:
        acc += fx * (1.0 - fy) * plane[y0, x0 + 1]
    if 0 <= y0 + 1 < h and 0 <= x0 < w:
        acc += (1.0 - fx) * fy * plane[y0 + 1, x0]
    if 0 <= y0 + 1 < h and 0 <= x0 + 1 < w:
        acc += fx * fy * plane[y0 + 1, x0 + 1]
    return acc


@njit(cache=True)
def bilinear_sample(img, xs, ys):
    c, h, w = img.shape
    n = xs.shape[0]
    out = np.empty((c, n), dtype=np.float32)
    for i in range(n):
        for ch in range(c):
            out[ch, i] = _bilinear_one(img[ch], xs[i], ys[i], h, w)
    return out


@njit(cache=True)
def avg_pool2(img):
    c, h, w = img.shape
    h_out = (h + 1) // 2
    w_out = (w + 1) // 2
    out = np.empty((c, h_out, w_out), dtype=np.float32)
    for ch in range(c):
        for oy in range(h_out):
            for ox in range(w_out):
                acc = 0.0
                count = 0
                for dy in range(2):
                    iy = 2 * oy + dy
                    if iy >= h:
                        continue
                    for dx in range(2):
                        ix = 2 * ox + dx
                        if ix >= w:
                            continue
                        acc += img[ch, iy, ix]
                        count += 1
                out[ch, oy, ox] = acc / count
    return out


@njit(cache=True)
def lookup_level(level, cx, cy, radius):
    _, hl, wl = level.shape
    h1, w1 = cx.shape
    side = 2 * radius + 1
    out = np.empty((side * side, h1, w1), dtype=np.float32)
    for y in range(h1):
        for x in range(w1):
            q = y * w1 + x
            plane = level[q]
            k = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    out[k, y, x] = _bilinear_one(
                        plane, cx[y, x] + dx, cy[y, x] + dy, hl, wl
                    )
                    k += 1
    return out


@njit(cache=True)
def convex_upsample(flow, logits, factor):
    f = factor
    h, w = flow.shape[1:]
    out = np.empty((2, f * h, f * w), dtype=np.float32)
    weights = np.empty(9, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for a in range(f):
                for b in range(f):
                    sub = a * f + b
                    m = -np.inf
                    for k in range(9):
                        v = logits[k * f * f + sub, i, j]
                        if v > m:
                            m = v
                    total = 0.0
                    for k in range(9):
                        e = np.exp(np.float64(logits[k * f * f + sub, i, j]) - m)
                        weights[k] = e
                        total += e
                    acc_u = 0.0
                    acc_v = 0.0
                    for k in range(9):
                        ny = min(max(i + k // 3 - 1, 0), h - 1)
                        nx = min(max(j + k % 3 - 1, 0), w - 1)
                        wt = weights[k] / total
                        acc_u += wt * flow[0, ny, nx]
                        acc_v += wt * flow[1, ny, nx]
                    out[0, i * f + a, j * f + b] = acc_u * f
                    out[1, i * f + a, j * f + b] = acc_v * f
    return out
