"""Evaluation metrics: endpoint error, outlier rate, weighted inlier AUC,
and region breakdowns by motion magnitude and occlusion-boundary distance.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDomainError, ShapeError

VELOCITY_EDGES = (10.0, 60.0)
DISTANCE_EDGES = (10.0, 60.0)
WAUC_STEPS = 100
WAUC_STEP_PX = 0.05
FL_EPE_PX = 3.0
FL_RELATIVE = 0.05


@dataclass
class RegionStat:
    aepe: float | None
    pixels: int


@dataclass
class EvalReport:
    aepe: float
    fl_all: float  # percent
    wauc: float  # percent
    pixel_count: int
    regions: dict = field(default_factory=dict)  # name -> RegionStat

    def to_record(self):
        rec = {
            "aepe": self.aepe,
            "fl_all": self.fl_all,
            "wauc": self.wauc,
            "pixel_count": self.pixel_count,
        }
        for name, stat in self.regions.items():
            rec[f"region.{name}.aepe"] = stat.aepe
            rec[f"region.{name}.pixels"] = stat.pixels
        return rec

    def to_text(self):
        lines = []
        for key, value in self.to_record().items():
            if isinstance(value, float):
                lines.append(f"{key} = {value:.6f}")
            else:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _check_pair(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeError(f"pred dims {pred.shape} != gt dims {gt.shape}")


def combined_valid(pred, gt, valid=None):
    """Intersection of both fields' masks and an optional extra mask."""
    _check_pair(pred, gt)
    mask = pred.valid_mask() & gt.valid_mask()
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != mask.shape:
            raise ShapeError(f"valid mask {valid.shape} != flow dims {mask.shape}")
        mask = mask & valid
    return mask


def epe_map(pred, gt):
    """Per-pixel endpoint error sqrt(du^2 + dv^2) as (H, W) float32."""
    _check_pair(pred, gt)
    du = pred.u.astype(np.float64) - gt.u.astype(np.float64)
    dv = pred.v.astype(np.float64) - gt.v.astype(np.float64)
    return np.sqrt(du * du + dv * dv).astype(np.float32)


def _valid_epe(pred, gt, valid):
    mask = combined_valid(pred, gt, valid)
    if not mask.any():
        raise EmptyDomainError("no valid pixels to evaluate")
    return epe_map(pred, gt)[mask].astype(np.float64), mask


def aepe(pred, gt, valid=None):
    """Mean endpoint error over valid pixels."""
    epe, _ = _valid_epe(pred, gt, valid)
    return float(epe.mean())


def fl_all(pred, gt, valid=None):
    """Percent of valid pixels whose error exceeds both 3 px and 5% of the
    true flow magnitude."""
    epe, mask = _valid_epe(pred, gt, valid)
    mag = gt.magnitude().astype(np.float64)[mask]
    outlier = (epe > FL_EPE_PX) & (epe > FL_RELATIVE * mag)
    return float(100.0 * outlier.mean())


def wauc(pred, gt, valid=None):
    """Weighted area under the inlier-rate curve, in percent.

    Thresholds are i*0.05 px for i = 1..100; the inlier rate at each is
    weighted by 1 - (i-1)/100.
    """
    epe, _ = _valid_epe(pred, gt, valid)
    total = 0.0
    weight_sum = 0.0
    for i in range(1, WAUC_STEPS + 1):
        weight = 1.0 - (i - 1) / WAUC_STEPS
        rate = float((epe <= i * WAUC_STEP_PX).mean())
        total += weight * rate
        weight_sum += weight
    return float(100.0 * total / weight_sum)


def velocity_masks(gt):
    """Partition gt's valid pixels by flow magnitude: [0,10), [10,60), [60,inf)."""
    mag = gt.magnitude()
    valid = gt.valid_mask()
    lo, hi = VELOCITY_EDGES
    return {
        "s0-10": valid & (mag < lo),
        "s10-60": valid & (mag >= lo) & (mag < hi),
        "s60+": valid & (mag >= hi),
    }


def occlusion_boundary(occ):
    """Pixels whose occlusion label differs from any 4-neighbor."""
    occ = np.asarray(occ, dtype=bool)
    boundary = np.zeros_like(occ)
    boundary[:-1] |= occ[:-1] != occ[1:]
    boundary[1:] |= occ[1:] != occ[:-1]
    boundary[:, :-1] |= occ[:, :-1] != occ[:, 1:]
    boundary[:, 1:] |= occ[:, 1:] != occ[:, :-1]
    return boundary


def occlusion_distance_masks(occ):
    """Partition pixels by Euclidean distance to the nearest occlusion-
    boundary pixel: [0,10), [10,60), [60,inf).

    With no boundary at all, every pixel lands in d60+.
    """
    from scipy.ndimage import distance_transform_edt

    occ = np.asarray(occ, dtype=bool)
    boundary = occlusion_boundary(occ)
    if not boundary.any():
        return {
            "d0-10": np.zeros_like(occ),
            "d10-60": np.zeros_like(occ),
            "d60+": np.ones_like(occ),
        }
    dist = distance_transform_edt(~boundary)
    lo, hi = DISTANCE_EDGES
    return {
        "d0-10": dist < lo,
        "d10-60": (dist >= lo) & (dist < hi),
        "d60+": dist >= hi,
    }


def _region_stat(epe64, mask, region):
    sel = mask & region
    count = int(sel.sum())
    if count == 0:
        return RegionStat(aepe=None, pixels=0)
    return RegionStat(aepe=float(epe64[sel].mean()), pixels=count)


def evaluate(pred, gt, valid=None, occ=None):
    """Full metric bundle for one prediction/ground-truth pair.

    Occlusion-distance regions are included only when occ is given.
    """
    mask = combined_valid(pred, gt, valid)
    if not mask.any():
        raise EmptyDomainError("no valid pixels to evaluate")
    epe64 = epe_map(pred, gt).astype(np.float64)

    regions = {}
    for name, region in velocity_masks(gt).items():
        regions[name] = _region_stat(epe64, mask, region)
    if occ is not None:
        occ = np.asarray(occ, dtype=bool)
        if occ.shape != mask.shape:
            raise ShapeError(f"occ mask {occ.shape} != flow dims {mask.shape}")
        dmasks = occlusion_distance_masks(occ)
        for name in ("d0-10", "d10-60"):
            regions[name] = _region_stat(epe64, mask, dmasks[name])

    return EvalReport(
        aepe=float(epe64[mask].mean()),
        fl_all=fl_all(pred, gt, valid),
        wauc=wauc(pred, gt, valid),
        pixel_count=int(mask.sum()),
        regions=regions,
    )
