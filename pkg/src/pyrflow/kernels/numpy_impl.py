"""Pure numpy fallback kernels.

Value accumulation conventions (shared with the numba build):

* conv2d accumulates in float32; the numpy build realizes the summation as
  one float32 matmul over im2col patches.
* bilinear sampling, pooling, and convex upsampling accumulate their few
  contributing terms in float64 and round once to float32.
"""

import numpy as np


def conv2d(inp, ker, bias, stride, pad):
    c_out, c_in, kh, kw = ker.shape
    if pad > 0:
        inp = np.pad(inp, ((0, 0), (pad, pad), (pad, pad)))
    h_out = (inp.shape[1] - kh) // stride + 1
    w_out = (inp.shape[2] - kw) // stride + 1
    windows = np.lib.stride_tricks.sliding_window_view(inp, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]  # (C_in, H_out, W_out, kh, kw)
    patches = windows.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, c_in * kh * kw)
    out = patches.astype(np.float32) @ ker.reshape(c_out, -1).T
    out += bias[None, :]
    return np.ascontiguousarray(out.T.reshape(c_out, h_out, w_out))


def bilinear_sample(img, xs, ys):
    c, h, w = img.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    acc = np.zeros((c, xs.shape[0]), dtype=np.float64)
    for dy, dx, wt in (
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (0, 1, fx * (1.0 - fy)),
        (1, 0, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ):
        yc = y0 + dy
        xc = x0 + dx
        inside = (yc >= 0) & (yc < h) & (xc >= 0) & (xc < w)
        vals = img[:, yc.clip(0, h - 1), xc.clip(0, w - 1)].astype(np.float64)
        acc += np.where(inside, wt, 0.0)[None, :] * vals
    return acc.astype(np.float32)


def avg_pool2(img):
    c, h, w = img.shape
    h_out = (h + 1) // 2
    w_out = (w + 1) // 2
    padded = np.zeros((c, 2 * h_out, 2 * w_out), dtype=np.float64)
    padded[:, :h, :w] = img
    sums = (
        padded[:, 0::2, 0::2]
        + padded[:, 1::2, 0::2]
        + padded[:, 0::2, 1::2]
        + padded[:, 1::2, 1::2]
    )
    row_cells = np.full(h_out, 2.0)
    col_cells = np.full(w_out, 2.0)
    if h % 2:
        row_cells[-1] = 1.0
    if w % 2:
        col_cells[-1] = 1.0
    counts = row_cells[:, None] * col_cells[None, :]
    return (sums / counts[None, :, :]).astype(np.float32)


def lookup_level(level, cx, cy, radius):
    p, hl, wl = level.shape
    h1, w1 = cx.shape
    side = 2 * radius + 1
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    # (K, H1, W1) sample coordinates, K ordered row-major over (dy, dx)
    xs = cx[None, :, :] + np.tile(offsets, side)[:, None, None]
    ys = cy[None, :, :] + np.repeat(offsets, side)[:, None, None]

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    q = np.arange(p).reshape(h1, w1)[None, :, :]

    acc = np.zeros((side * side, h1, w1), dtype=np.float64)
    for dy, dx, wt in (
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (0, 1, fx * (1.0 - fy)),
        (1, 0, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ):
        yc = y0 + dy
        xc = x0 + dx
        inside = (yc >= 0) & (yc < hl) & (xc >= 0) & (xc < wl)
        vals = level[q, yc.clip(0, hl - 1), xc.clip(0, wl - 1)].astype(np.float64)
        acc += np.where(inside, wt, 0.0) * vals
    return acc.astype(np.float32)


def convex_upsample(flow, logits, factor):
    f = factor
    h, w = flow.shape[1:]
    grouped = logits.reshape(9, f, f, h, w).astype(np.float64)
    grouped -= grouped.max(axis=0, keepdims=True)
    e = np.exp(grouped)
    weights = e / e.sum(axis=0, keepdims=True)

    padded = np.pad(flow, ((0, 0), (1, 1), (1, 1)), mode="edge").astype(np.float64)
    neigh = np.stack(
        [padded[:, dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    )  # (9, 2, h, w)
    up = np.einsum("kabij,kcij->cabij", weights, neigh) * f
    return up.transpose(0, 3, 1, 4, 2).reshape(2, f * h, f * w).astype(np.float32)
