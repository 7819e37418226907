"""All-pairs correlation volume, multi-scale pyramid, and flow-indexed lookup.

The volume holds the dot-product similarity of every source pixel against
every target pixel, scaled by 1/sqrt(D) so magnitudes do not depend on the
feature dimension. Coarser pyramid levels are 2x2 mean pools over the
target dimensions only; the source grid never changes. A lookup gathers,
for each source pixel, a (2r+1)^2 window of correlation values around the
position its current flow estimate points at, in every level's own grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError
from .tensor_ops import as_tensor


@dataclass
class CorrelationPyramid:
    """Immutable stack of pooled correlation volumes.

    levels[l] has shape (H1*W1, ceil(H2/2^l), ceil(W2/2^l)).
    """

    levels: list = field(default_factory=list)
    source_dims: tuple = (0, 0)
    feature_dim: int = 0

    @property
    def num_levels(self):
        return len(self.levels)

    def element_count(self):
        """Total stored correlation values across all levels (the quadratic
        memory footprint)."""
        return int(sum(lvl.size for lvl in self.levels))

    def base_element_count(self):
        return int(self.levels[0].size)


@dataclass
class LookupField:
    """Correlation window gathered per source pixel.

    values: (num_levels*(2*radius+1)^2, H1, W1), channels ordered
    level-major, then row-major over (dy, dx) offsets.
    """

    values: np.ndarray
    radius: int
    num_levels: int

    def __post_init__(self):
        side = 2 * self.radius + 1
        expected = self.num_levels * side * side
        if self.values.shape[0] != expected:
            raise ShapeError(
                f"lookup field has {self.values.shape[0]} channels, "
                f"expected {expected}"
            )


def build_corr_volume(f1, f2):
    """All-pairs correlation of two feature maps.

    f1: (D, H1, W1), f2: (D, H2, W2). Returns (H1*W1, H2, W2) float32 where
    entry (y1*W1+x1, y2, x2) = <f1[:, y1, x1], f2[:, y2, x2]> / sqrt(D).
    """
    f1 = as_tensor(f1, rank=3, name="f1")
    f2 = as_tensor(f2, rank=3, name="f2")
    if f1.shape[0] != f2.shape[0]:
        raise ShapeError(
            f"feature dims differ: {f1.shape[0]} vs {f2.shape[0]}"
        )
    d = f1.shape[0]
    flat1 = f1.reshape(d, -1).T  # (H1*W1, D)
    flat2 = f2.reshape(d, -1)  # (D, H2*W2)
    vol = flat1 @ flat2 / np.float32(math.sqrt(d))
    return np.ascontiguousarray(vol.reshape(-1, f2.shape[1], f2.shape[2]))


def max_pyramid_levels(target_dims):
    """Largest legal level count for the given target dims."""
    return int(math.floor(math.log2(min(target_dims)))) + 1


def build_pyramid(volume, num_levels, source_dims, feature_dim=0):
    """Pool a correlation volume into a multi-scale pyramid.

    Level 0 is the volume itself; level l+1 halves the target dims via 2x2
    mean pooling. num_levels above log2(min target dim)+1 is rejected.
    """
    volume = as_tensor(volume, rank=3, name="volume")
    h1, w1 = source_dims
    if volume.shape[0] != h1 * w1:
        raise ShapeError(
            f"volume has {volume.shape[0]} source rows, dims {source_dims} "
            f"imply {h1 * w1}"
        )
    if num_levels < 1:
        raise ConfigError(f"need at least 1 pyramid level, got {num_levels}")
    limit = max_pyramid_levels(volume.shape[1:])
    if num_levels > limit:
        raise ConfigError(
            f"{num_levels} levels exceed the {limit} supported by target "
            f"dims {volume.shape[1:]}"
        )
    levels = [volume]
    for _ in range(num_levels - 1):
        levels.append(kernels.avg_pool2(levels[-1]))
    return CorrelationPyramid(
        levels=levels, source_dims=(h1, w1), feature_dim=feature_dim
    )


def corr_pyramid(f1, f2, num_levels):
    """Build the pyramid directly from a feature-map pair."""
    vol = build_corr_volume(f1, f2)
    return build_pyramid(
        vol, num_levels, source_dims=f1.shape[1:], feature_dim=f1.shape[0]
    )


def lookup(pyramid, flow, radius):
    """Gather correlation windows around the flow-displaced positions.

    flow: (2, H1, W1) array of (u, v) displacements in level-0 target
    pixels. For level l the window center is (p + flow(p)) / 2^l and the
    (2r+1)^2 offsets step in that level's grid; out-of-frame samples read
    as zero.
    """
    if radius < 0:
        raise ConfigError(f"lookup radius must be >= 0, got {radius}")
    flow = np.asarray(flow, dtype=np.float32)
    h1, w1 = pyramid.source_dims
    if flow.shape != (2, h1, w1):
        raise ShapeError(
            f"flow shape {flow.shape} does not match source dims ({h1}, {w1})"
        )
    grid_x, grid_y = np.meshgrid(
        np.arange(w1, dtype=np.float64), np.arange(h1, dtype=np.float64)
    )
    base_x = grid_x + flow[0].astype(np.float64)
    base_y = grid_y + flow[1].astype(np.float64)

    per_level = []
    for l, level in enumerate(pyramid.levels):
        scale = 1.0 / (2.0**l)
        per_level.append(
            kernels.lookup_level(
                level,
                np.ascontiguousarray(base_x * scale),
                np.ascontiguousarray(base_y * scale),
                radius,
            )
        )
    values = np.concatenate(per_level, axis=0)
    return LookupField(values=values, radius=radius, num_levels=pyramid.num_levels)
