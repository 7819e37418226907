"""Per-pixel displacement field with an optional validity mask."""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass
class FlowField:
    """u, v: (H, W) float32 displacements; valid: optional (H, W) bool."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float32)
        self.v = np.ascontiguousarray(self.v, dtype=np.float32)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise ShapeError(
                f"u/v must be matching (H,W) arrays, got {self.u.shape} "
                f"and {self.v.shape}"
            )
        if self.valid is not None:
            self.valid = np.ascontiguousarray(self.valid, dtype=bool)
            if self.valid.shape != self.u.shape:
                raise ShapeError(
                    f"valid mask {self.valid.shape} != flow dims {self.u.shape}"
                )
        mask = self.valid if self.valid is not None else slice(None)
        if not (np.isfinite(self.u[mask]).all() and np.isfinite(self.v[mask]).all()):
            raise ValidationError("flow has non-finite values at valid pixels")

    @property
    def shape(self):
        return self.u.shape

    @classmethod
    def zeros(cls, h, w):
        return cls(np.zeros((h, w), np.float32), np.zeros((h, w), np.float32))

    @classmethod
    def from_array(cls, arr, valid=None):
        """Build from a (2, H, W) array."""
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[0] != 2:
            raise ShapeError(f"expected (2,H,W) flow array, got {arr.shape}")
        return cls(arr[0], arr[1], valid)

    def as_array(self):
        """Return the (2, H, W) float32 view used by the estimation loop."""
        return np.stack([self.u, self.v])

    def magnitude(self):
        return np.sqrt(self.u.astype(np.float64) ** 2
                       + self.v.astype(np.float64) ** 2).astype(np.float32)

    def valid_mask(self):
        """Validity as a dense bool array (all-True when no mask is set)."""
        if self.valid is None:
            return np.ones(self.u.shape, dtype=bool)
        return self.valid
