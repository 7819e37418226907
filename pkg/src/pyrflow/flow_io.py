"""Flow containers and the color-wheel visualizer.

Two container formats, both deterministic and loss-characterized:

* ``.flo``: 4-byte float magic 202021.25, int32 width, int32 height, then
  row-major interleaved (u, v) float32 pairs, all little-endian. Lossless;
  cannot carry a validity mask.
* 16-bit PNG planes (KITTI convention): channels (u_enc, v_enc, valid)
  with value = (stored - 2^15) / 64. Quantization error is at most 1/128
  per component inside the encodable range [-512, 511.984375]; stored
  values outside it are clamped (counted and logged, never an error).
  Invalid pixels are written as all-zero triplets.

PNG compression itself is delegated to OpenCV; the encode/decode contract
here is over decoded uint16 planes.
"""

import logging

import numpy as np

from .errors import FlowFormatError, ShapeError, TruncatedFileError, ValidationError
from .flowfield import FlowField

logger = logging.getLogger(__name__)

FLO_MAGIC = 202021.25
KITTI_OFFSET = 2**15
KITTI_SCALE = 64.0


def write_flo(field):
    """Encode a FlowField as .flo bytes. The format has no mask, so a
    field with invalid pixels is rejected."""
    if field.valid is not None and not field.valid.all():
        raise ValidationError(".flo cannot represent invalid pixels")
    h, w = field.shape
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes()
    header += np.array([w, h], dtype="<i4").tobytes()
    interleaved = np.stack([field.u, field.v], axis=-1).astype("<f4")
    return header + interleaved.tobytes()


def read_flo(data):
    """Decode .flo bytes; bitwise inverse of write_flo."""
    if len(data) < 12:
        raise TruncatedFileError(f".flo header needs 12 bytes, got {len(data)}")
    magic = np.frombuffer(data, dtype="<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FlowFormatError(f"bad .flo magic {magic!r}")
    w, h = (int(x) for x in np.frombuffer(data, dtype="<i4", count=2, offset=4))
    if w < 1 or h < 1:
        raise FlowFormatError(f"bad .flo dims {w}x{h}")
    expected = 12 + 8 * w * h
    if len(data) < expected:
        raise TruncatedFileError(
            f".flo payload needs {expected} bytes, got {len(data)}"
        )
    if len(data) > expected:
        raise FlowFormatError(f"{len(data) - expected} trailing bytes in .flo")
    flat = np.frombuffer(data, dtype="<f4", count=2 * w * h, offset=12)
    uv = flat.reshape(h, w, 2)
    return FlowField(uv[..., 0], uv[..., 1])


def read_flo_file(path):
    with open(path, "rb") as fh:
        return read_flo(fh.read())


def write_flo_file(path, field):
    with open(path, "wb") as fh:
        fh.write(write_flo(field))


def decode_kitti_planes(planes):
    """Decode (3, H, W) uint16 planes (u_enc, v_enc, valid) to a FlowField.

    Invalid pixels decode to zero flow. A stored 0 with valid=1 is legal
    and means -512.0.
    """
    planes = np.asarray(planes)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise ShapeError(f"expected (3,H,W) uint16 planes, got {planes.shape}")
    valid = planes[2] != 0
    u = (planes[0].astype(np.float32) - KITTI_OFFSET) / np.float32(KITTI_SCALE)
    v = (planes[1].astype(np.float32) - KITTI_OFFSET) / np.float32(KITTI_SCALE)
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u, v, valid)


def encode_kitti_planes(field):
    """Encode a FlowField as (3, H, W) uint16 planes, rounding to nearest.

    Values outside the encodable range are clamped; the count is logged as
    a warning.
    """
    valid = field.valid_mask()
    enc_u = np.rint(field.u.astype(np.float64) * KITTI_SCALE + KITTI_OFFSET)
    enc_v = np.rint(field.v.astype(np.float64) * KITTI_SCALE + KITTI_OFFSET)
    clamped = int(
        ((enc_u < 0) | (enc_u > 65535) | (enc_v < 0) | (enc_v > 65535))[valid].sum()
    )
    if clamped:
        logger.warning("clamped %d flow values outside the KITTI range", clamped)
    planes = np.zeros((3,) + field.shape, dtype=np.uint16)
    planes[0][valid] = enc_u.clip(0, 65535).astype(np.uint16)[valid]
    planes[1][valid] = enc_v.clip(0, 65535).astype(np.uint16)[valid]
    planes[2][valid] = 1
    return planes


def read_kitti_png(path):
    import cv2

    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FlowFormatError(f"cannot decode PNG {path}")
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint16:
        raise FlowFormatError(
            f"{path} is not a 16-bit 3-channel flow PNG "
            f"(got {img.dtype}, shape {img.shape})"
        )
    return decode_kitti_planes(img[:, :, ::-1].transpose(2, 0, 1))


def write_kitti_png(path, field):
    import cv2

    planes = encode_kitti_planes(field)
    bgr = planes[::-1].transpose(1, 2, 0)
    if not cv2.imwrite(str(path), np.ascontiguousarray(bgr)):
        raise OSError(f"cannot write PNG {path}")


def make_colorwheel():
    """The 55-bin RGB color wheel used for flow rendering.

    Six hue segments (red-yellow 15, yellow-green 6, green-cyan 4,
    cyan-blue 11, blue-magenta 13, magenta-red 6); each holds one channel
    at 255 while another ramps up or down.
    """
    segments = [
        (15, 0, 1, +1),
        (6, 1, 0, -1),
        (4, 1, 2, +1),
        (11, 2, 1, -1),
        (13, 2, 0, +1),
        (6, 0, 2, -1),
    ]
    wheel = np.zeros((sum(s[0] for s in segments), 3))
    row = 0
    for n, hold, ramp, sign in segments:
        wheel[row : row + n, hold] = 255
        steps = np.floor(255 * np.arange(n) / n)
        wheel[row : row + n, ramp] = steps if sign > 0 else 255 - steps
        row += n
    return wheel


def flow_to_color(field, max_norm=None):
    """Render flow to (3, H, W) uint8 RGB.

    Hue encodes direction, saturation encodes magnitude relative to
    max_norm (field maximum when omitted). Zero flow renders near-white;
    invalid pixels render black.
    """
    valid = field.valid_mask()
    u = field.u.astype(np.float64)
    v = field.v.astype(np.float64)
    rad = np.sqrt(u * u + v * v)
    if max_norm is None:
        max_norm = rad[valid].max() if valid.any() else 0.0
    norm = rad / max(max_norm, 1e-9)

    wheel = make_colorwheel()
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1.0) / 2.0 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = fk - k0

    out = np.zeros((3,) + field.shape, dtype=np.uint8)
    for ch in range(3):
        col0 = wheel[k0, ch] / 255.0
        col1 = wheel[k1, ch] / 255.0
        col = (1.0 - f) * col0 + f * col1
        inside = norm <= 1.0
        col[inside] = 1.0 - norm[inside] * (1.0 - col[inside])
        col[~inside] *= 0.75
        out[ch] = np.where(valid, np.floor(255.0 * col), 0).astype(np.uint8)
    return out
