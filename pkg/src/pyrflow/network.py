"""Forward-only network components.

Two convolutional trunks produce stride-8 and stride-4 feature maps (the
stride-4 map is a tap after the second stage of the same trunk, not a
second encoder). The update block - motion encoder, ConvGRU, flow head,
mask head - reads one shared set of archive entries regardless of which
pyramid stage invokes it.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError
from .tensor_ops import as_tensor, conv2d, relu, sigmoid, tanh


@dataclass
class PyramidFeatures:
    eighth: np.ndarray  # (D, H/8, W/8)
    quarter: np.ndarray  # (D, H/4, W/4)


@dataclass
class LevelContext:
    hidden: np.ndarray  # (Dh, h, w), tanh-bounded initial GRU state
    context: np.ndarray  # (Dc, h, w), relu-activated static context


@dataclass
class ContextFeatures:
    eighth: LevelContext
    quarter: LevelContext


def _check_image(image):
    image = as_tensor(image, rank=3, name="image")
    if image.shape[0] != 3:
        raise ShapeError(f"expected 3-channel image, got {image.shape}")
    if image.shape[1] % 8 or image.shape[2] % 8:
        raise ShapeError(f"image dims {image.shape[1:]} must be divisible by 8")
    return image


def _conv(x, w, name, stride=1, padding=1):
    return conv2d(x, w.get(f"{name}.weight"), w.get(f"{name}.bias"),
                  stride=stride, padding=padding)


def _trunk(image, w, prefix):
    """Three stride-2 stages; returns (quarter tap, eighth output)."""
    x = relu(_conv(image, w, f"{prefix}.stage1.conv1", stride=2))
    x = relu(_conv(x, w, f"{prefix}.stage1.conv2"))
    x = relu(_conv(x, w, f"{prefix}.stage2.conv1", stride=2))
    quarter = relu(_conv(x, w, f"{prefix}.stage2.conv2"))
    x = relu(_conv(quarter, w, f"{prefix}.stage3.conv1", stride=2))
    eighth = relu(_conv(x, w, f"{prefix}.stage3.conv2"))
    return quarter, eighth


def feature_encode(image, w):
    """Encode a [-1, 1]-normalized image into stride-8/stride-4 features."""
    image = _check_image(image)
    quarter, eighth = _trunk(image, w, "fnet")
    return PyramidFeatures(eighth=eighth, quarter=quarter)


def _split_context(feats, w):
    dh = w.config.hidden_dim
    return LevelContext(hidden=tanh(feats[:dh]), context=relu(feats[dh:]))


def context_encode(image, w):
    """Per-level initial hidden state (tanh) and static context (relu)."""
    image = _check_image(image)
    quarter, eighth = _trunk(image, w, "cnet")
    return ContextFeatures(
        eighth=_split_context(eighth, w), quarter=_split_context(quarter, w)
    )


def motion_encode(corr, flow, w):
    """Fuse a correlation lookup with the current flow into motion features.

    corr: (lookup_channels, h, w); flow: (2, h, w). Output has
    config.motion_dim channels; the raw flow is re-appended at the end.
    """
    corr = np.asarray(corr, dtype=np.float32)
    flow = np.asarray(flow, dtype=np.float32)
    if corr.shape[1:] != flow.shape[1:]:
        raise ShapeError(
            f"corr dims {corr.shape[1:]} != flow dims {flow.shape[1:]}"
        )
    if corr.shape[0] != w.config.lookup_channels:
        raise ShapeError(
            f"corr has {corr.shape[0]} channels, config implies "
            f"{w.config.lookup_channels}"
        )
    c = relu(_conv(corr, w, "update.motion.corr", padding=0))
    f = relu(_conv(flow, w, "update.motion.flow"))
    fused = relu(_conv(np.concatenate([c, f]), w, "update.motion.fuse"))
    return np.concatenate([fused, flow])


def gru_step(h, x, w):
    """One ConvGRU update; output stays in (-1, 1) when h does."""
    h = np.asarray(h, dtype=np.float32)
    x = np.asarray(x, dtype=np.float32)
    if h.shape[1:] != x.shape[1:]:
        raise ShapeError(f"hidden dims {h.shape[1:]} != input dims {x.shape[1:]}")
    hx = np.concatenate([h, x])
    z = sigmoid(_conv(hx, w, "update.gru.convz"))
    r = sigmoid(_conv(hx, w, "update.gru.convr"))
    q = tanh(_conv(np.concatenate([r * h, x]), w, "update.gru.convq"))
    return (1.0 - z) * h + z * q


def flow_head(h, w):
    """Two-conv head producing the flow update (2, h, w), no activation."""
    x = relu(_conv(h, w, "update.flow.conv1"))
    return _conv(x, w, "update.flow.conv2")


def mask_head(h, w):
    """Two-conv head producing convex-upsample logits (9*factor^2, h, w)."""
    x = relu(_conv(h, w, "update.mask.conv1"))
    return _conv(x, w, "update.mask.conv2", padding=0)


def convex_upsample(flow, mask_logits, factor=4):
    """Upsample flow by per-pixel convex combinations of its 3x3 neighbors.

    mask_logits channel c = k*factor^2 + a*factor + b holds the logit of
    neighbor k (row-major over the 3x3 window, replicate-padded at borders)
    for subpixel (a, b); the 9 logits per subpixel are softmaxed. Flow
    values are scaled by factor.
    """
    flow = np.ascontiguousarray(flow, dtype=np.float32)
    mask_logits = np.ascontiguousarray(mask_logits, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ShapeError(f"flow must be (2,h,w), got {flow.shape}")
    if mask_logits.shape[1:] != flow.shape[1:]:
        raise ShapeError(
            f"mask dims {mask_logits.shape[1:]} != flow dims {flow.shape[1:]}"
        )
    if mask_logits.shape[0] != 9 * factor * factor:
        raise ConfigError(
            f"mask has {mask_logits.shape[0]} channels, factor {factor} "
            f"needs {9 * factor * factor}"
        )
    return kernels.convex_upsample(flow, mask_logits, factor)
