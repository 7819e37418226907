"""Two-level coarse-to-fine flow estimation.

The flow starts at zero on the stride-8 grid and is refined by 12 update
iterations; a plain 2x bilinear upsample (values doubled) seeds the
stride-4 stage, which runs 12 more iterations with the same update
weights, and a learned 4x convex upsample produces the full-resolution
field. Inputs of arbitrary size are replicate-padded on the right/bottom
to a multiple of 8 and the output is cropped back.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .correlation import corr_pyramid, lookup
from .errors import ShapeError
from .flowfield import FlowField
from .network import (
    context_encode,
    convex_upsample,
    feature_encode,
    flow_head,
    gru_step,
    mask_head,
    motion_encode,
)
from .tensor_ops import as_tensor

DEFAULT_ITERATIONS = 12


@dataclass(frozen=True)
class PadSpec:
    right: int
    bottom: int


@dataclass
class StageTrace:
    stride: int
    flows: list = field(default_factory=list)  # one FlowField per iteration
    corr_elements: int = 0  # all pyramid levels
    corr_base_elements: int = 0  # level 0 only: H1*W1*H2*W2
    seconds: float = 0.0


@dataclass
class InferenceTrace:
    stages: list = field(default_factory=list)
    pad: PadSpec = PadSpec(0, 0)

    def iteration_counts(self):
        return [len(s.flows) for s in self.stages]

    def total_corr_elements(self):
        return sum(s.corr_elements for s in self.stages)


def pad_to_multiple8(image):
    """Replicate-pad right/bottom so H and W divide by 8."""
    image = np.asarray(image)
    h, w = image.shape[-2:]
    pad = PadSpec(right=(-w) % 8, bottom=(-h) % 8)
    if pad.right or pad.bottom:
        image = np.pad(
            image, ((0, 0), (0, pad.bottom), (0, pad.right)), mode="edge"
        )
    return image, pad


def crop_pad(arr, pad):
    """Invert pad_to_multiple8 on a (..., H, W) array."""
    h = arr.shape[-2] - pad.bottom
    w = arr.shape[-1] - pad.right
    return arr[..., :h, :w]


def upsample2x_init(flow):
    """Double a (2, h, w) flow's resolution bilinearly and its values by 2.

    Interpolation aligns the corner pixel centers of the two grids, so all
    sample points stay inside the source.
    """
    flow = np.ascontiguousarray(flow, dtype=np.float32)
    _, h, w = flow.shape
    ys = np.arange(2 * h) * ((h - 1) / (2 * h - 1)) if h > 1 else np.zeros(2 * h)
    xs = np.arange(2 * w) * ((w - 1) / (2 * w - 1)) if w > 1 else np.zeros(2 * w)
    gx, gy = np.meshgrid(xs, ys)
    sampled = kernels.bilinear_sample(
        flow, np.ascontiguousarray(gx.ravel()), np.ascontiguousarray(gy.ravel())
    )
    return sampled.reshape(2, 2 * h, 2 * w) * np.float32(2.0)


def normalize_image(image):
    """Map [0, 255] pixels to [-1, 1] float32."""
    image = as_tensor(image, rank=3, name="image")
    return image / np.float32(127.5) - np.float32(1.0)


def run_update_stage(pyramid, ctx, flow, w, iterations):
    """Run the shared-weight update iterations on one pyramid stage.

    ctx is the stage's LevelContext; flow is the (2, h, w) initialization.
    Returns (flow, hidden, per-iteration FlowField list).
    """
    hidden = ctx.hidden
    flows = []
    for _ in range(iterations):
        corr = lookup(pyramid, flow, w.config.radius)
        motion = motion_encode(corr.values, flow, w)
        x = np.concatenate([ctx.context, motion])
        hidden = gru_step(hidden, x, w)
        flow = flow + flow_head(hidden, w)
        flows.append(FlowField(flow[0].copy(), flow[1].copy()))
    return flow, hidden, flows


def estimate_flow(image1, image2, w, iterations=DEFAULT_ITERATIONS):
    """Estimate dense flow from image1 to image2 ([0,255] RGB, (3,H,W)).

    Returns (FlowField at the input resolution, InferenceTrace with the
    per-iteration flows of both stages).
    """
    image1 = as_tensor(image1, rank=3, name="image1")
    image2 = as_tensor(image2, rank=3, name="image2")
    if image1.shape != image2.shape:
        raise ShapeError(
            f"image dims differ: {image1.shape} vs {image2.shape}"
        )
    if image1.shape[0] != 3:
        raise ShapeError(f"expected 3-channel images, got {image1.shape}")

    h, w_in = image1.shape[1:]
    padded1, pad = pad_to_multiple8(normalize_image(image1))
    padded2, _ = pad_to_multiple8(normalize_image(image2))

    feats1 = feature_encode(padded1, w)
    feats2 = feature_encode(padded2, w)
    ctx = context_encode(padded1, w)
    trace = InferenceTrace(pad=pad)

    # stride-8 stage from zero flow
    t0 = time.perf_counter()
    pyr8 = corr_pyramid(feats1.eighth, feats2.eighth, w.config.levels)
    flow = np.zeros((2,) + feats1.eighth.shape[1:], dtype=np.float32)
    flow, _, flows8 = run_update_stage(pyr8, ctx.eighth, flow, w, iterations)
    trace.stages.append(
        StageTrace(
            stride=8,
            flows=flows8,
            corr_elements=pyr8.element_count(),
            corr_base_elements=pyr8.base_element_count(),
            seconds=time.perf_counter() - t0,
        )
    )

    # stride-4 stage seeded by the upsampled coarse flow, same weights
    t0 = time.perf_counter()
    pyr4 = corr_pyramid(feats1.quarter, feats2.quarter, w.config.levels)
    flow = upsample2x_init(flow)
    flow, hidden, flows4 = run_update_stage(pyr4, ctx.quarter, flow, w, iterations)
    trace.stages.append(
        StageTrace(
            stride=4,
            flows=flows4,
            corr_elements=pyr4.element_count(),
            corr_base_elements=pyr4.base_element_count(),
            seconds=time.perf_counter() - t0,
        )
    )

    full = convex_upsample(flow, mask_head(hidden, w), w.config.upsample_factor)
    full = crop_pad(full, pad)
    assert full.shape[1:] == (h, w_in)
    return FlowField(full[0], full[1]), trace
