"""Dense-array primitives: validated float32 tensors and the core kernels.

A "tensor" here is a plain float32 ndarray, channel-first: (C, H, W) for
maps, (C_out, C_in, kH, kW) for conv kernels. ``as_tensor`` is the boundary
where external values are checked; the operations below validate shapes and
dispatch to the active kernel backend.
"""

import numpy as np

from . import kernels
from .errors import ShapeError, ValidationError


def as_tensor(data, rank=None, name="tensor"):
    """Convert external data to a validated float32 array.

    Raises ValidationError on non-finite values, ShapeError on empty
    extents or a rank mismatch.
    """
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if rank is not None and arr.ndim != rank:
        raise ShapeError(f"{name}: expected rank {rank}, got {arr.ndim}")
    if arr.size == 0 or any(d < 1 for d in arr.shape):
        raise ShapeError(f"{name}: all extents must be >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name}: contains NaN or Inf")
    return arr


def conv2d(inp, kernel, bias=None, stride=1, padding=0):
    """2-D convolution with zero padding, float32 accumulation.

    inp: (C_in, H, W); kernel: (C_out, C_in, kH, kW) with odd kH, kW;
    bias: (C_out,) or None. Output is (C_out, H', W') with
    H' = (H + 2*padding - kH) // stride + 1.
    """
    inp = np.ascontiguousarray(inp, dtype=np.float32)
    kernel = np.ascontiguousarray(kernel, dtype=np.float32)
    if inp.ndim != 3 or kernel.ndim != 4:
        raise ShapeError(
            f"conv2d: need (C,H,W) input and (O,I,kH,kW) kernel, "
            f"got {inp.shape} and {kernel.shape}"
        )
    c_out, c_in, kh, kw = kernel.shape
    if c_in != inp.shape[0]:
        raise ShapeError(
            f"conv2d: kernel expects {c_in} input channels, input has {inp.shape[0]}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d: kernel dims must be odd, got {kh}x{kw}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: bad stride/padding ({stride}, {padding})")
    if inp.shape[1] + 2 * padding < kh or inp.shape[2] + 2 * padding < kw:
        raise ShapeError(
            f"conv2d: padded input {inp.shape[1:]} smaller than kernel {kh}x{kw}"
        )
    if not np.isfinite(kernel).all():
        raise ValidationError("conv2d: kernel contains NaN or Inf")
    if bias is None:
        bias = np.zeros(c_out, dtype=np.float32)
    else:
        bias = np.ascontiguousarray(bias, dtype=np.float32)
        if bias.shape != (c_out,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({c_out},)")
        if not np.isfinite(bias).all():
            raise ValidationError("conv2d: bias contains NaN or Inf")
    return kernels.conv2d(inp, kernel, bias, stride, padding)


def bilinear_sample(inp, coords):
    """Sample (C,H,W) map at subpixel (x, y) points, zero outside the grid.

    coords: sequence of (x, y) in pixel units, (0, 0) at the top-left pixel
    center. Returns (C, len(coords)) float32. Neighbors falling outside
    [0, W-1] x [0, H-1] contribute zero.
    """
    inp = np.ascontiguousarray(inp, dtype=np.float32)
    if inp.ndim != 3:
        raise ShapeError(f"bilinear_sample: need (C,H,W) input, got {inp.shape}")
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"bilinear_sample: coords must be (N,2), got {pts.shape}")
    xs = np.ascontiguousarray(pts[:, 0])
    ys = np.ascontiguousarray(pts[:, 1])
    return kernels.bilinear_sample(inp, xs, ys)


def avg_pool2(inp):
    """Non-overlapping 2x2 mean pool; a trailing odd row/column is averaged
    over the cells actually present."""
    inp = np.ascontiguousarray(inp, dtype=np.float32)
    if inp.ndim != 3:
        raise ShapeError(f"avg_pool2: need (C,H,W) input, got {inp.shape}")
    return kernels.avg_pool2(inp)


def softmax(vec):
    """Stable softmax of a 1-D vector (max subtraction), float32 output."""
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    if not np.isfinite(v).all():
        raise ValidationError("softmax: input contains NaN or Inf")
    e = np.exp(v - v.max())
    return (e / e.sum()).astype(np.float32)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float32)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(np.float32)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float32))


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0.0))
