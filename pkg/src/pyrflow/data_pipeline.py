"""Training-data machinery: weighted multi-dataset scheduling, ground-truth
sanitization for the driving dataset, and the photometric / spatial /
erase augmentations. Every transform is a pure function of its inputs,
parameters, and seed.

Images are (3, H, W) float32 RGB in [0, 1] throughout this module.
"""

import configparser
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError
from .flowfield import FlowField

VIPER_ROW_CUTOFF = 700
VIPER_MAX_MAGNITUDE = 300.0


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    size: int
    weight: int

    def __post_init__(self):
        if self.size < 0 or self.weight < 0:
            raise ConfigError(f"negative size/weight in {self}")


@dataclass(frozen=True)
class AugmentParams:
    brightness: float = 0.1  # additive, sampled from [-b, b]
    contrast: float = 0.2  # factor sampled from [1-c, 1+c]
    saturation: float = 0.2  # factor sampled from [1-s, 1+s]
    hue: float = 0.05  # rotation sampled from [-h, h], fraction of the circle
    min_scale: float = 0.8
    max_scale: float = 1.5
    max_stretch: float = 0.2  # x/y anisotropy factor bound
    erase_probability: float = 0.5
    erase_min_rects: int = 1
    erase_max_rects: int = 3
    erase_min_size: int = 50
    erase_max_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.erase_probability <= 1.0:
            raise ConfigError(f"erase probability {self.erase_probability} not in [0,1]")
        if self.min_scale <= 0 or self.max_scale < self.min_scale:
            raise ConfigError(
                f"bad scale bounds [{self.min_scale}, {self.max_scale}]"
            )
        if not 0.0 <= self.max_stretch < 1.0:
            raise ConfigError(f"max_stretch {self.max_stretch} not in [0,1)")
        if self.erase_min_rects < 1 or self.erase_max_rects < self.erase_min_rects:
            raise ConfigError("bad erase rectangle count range")
        if self.erase_min_size < 1 or self.erase_max_size < self.erase_min_size:
            raise ConfigError("bad erase rectangle size range")


def build_schedule(specs, seed):
    """One balanced epoch: every sample of dataset d appears weight_d times,
    in a seeded uniform shuffle. Returns a list of (dataset, index)."""
    entries = []
    for spec in specs:
        for _ in range(spec.weight):
            entries.extend((spec.name, i) for i in range(spec.size))
    if not entries:
        raise ConfigError("schedule is empty: no dataset has weight*size > 0")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(entries))
    return [entries[i] for i in order]


def format_schedule(entries):
    """Newline-delimited 'dataset index' records for audit."""
    return "".join(f"{name} {index}\n" for name, index in entries)


def viper_sanitize(gt, row_cutoff=VIPER_ROW_CUTOFF, max_magnitude=VIPER_MAX_MAGNITUDE):
    """Mask out implausible ground truth: flow magnitude strictly above
    max_magnitude, and every row from row_cutoff down (the hood region).
    Flow values are untouched; only the mask changes. Idempotent."""
    keep = gt.magnitude() <= max_magnitude
    rows = np.arange(gt.shape[0])[:, None] < row_cutoff
    return FlowField(gt.u, gt.v, gt.valid_mask() & keep & rows)


def _check_image01(img, name):
    img = np.ascontiguousarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"{name}: expected (3,H,W) image, got {img.shape}")
    if img.min() < -1e-6 or img.max() > 1.0 + 1e-6:
        raise ValidationError(f"{name}: pixel values outside [0,1]")
    return img


def _rgb_to_hsv(rgb):
    r, g, b = rgb
    maxc = rgb.max(axis=0)
    minc = rgb.min(axis=0)
    delta = maxc - minc
    safe = np.where(delta == 0, 1.0, delta)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.select(
        [delta == 0, maxc == r, maxc == g],
        [0.0, bc - gc, 2.0 + rc - bc],
        default=4.0 + gc - rc,
    )
    h = (h / 6.0) % 1.0
    s = np.where(maxc == 0, 0.0, delta / np.where(maxc == 0, 1.0, maxc))
    return np.stack([h, s, maxc])


def _hsv_to_rgb(hsv):
    h, s, v = hsv
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [v, q, p, p, t], default=v)
    g = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [t, v, v, q, p], default=p)
    b = np.select([i == 0, i == 1, i == 2, i == 3, i == 4], [p, p, t, v, v], default=q)
    return np.stack([r, g, b])


LUMA = np.array([0.299, 0.587, 0.114])


def sample_photometric(params, seed):
    """Draw the four perturbations (brightness add, contrast factor,
    saturation factor, hue rotation), in that fixed order."""
    rng = np.random.default_rng(seed)
    return (
        float(rng.uniform(-params.brightness, params.brightness)),
        float(rng.uniform(1.0 - params.contrast, 1.0 + params.contrast)),
        float(rng.uniform(1.0 - params.saturation, 1.0 + params.saturation)),
        float(rng.uniform(-params.hue, params.hue)),
    )


def apply_photometric(img, brightness, contrast, saturation, hue):
    """Apply the four perturbations in order; identity values short-circuit
    so an all-identity draw returns the input bitwise."""
    img = img.astype(np.float64)
    if brightness != 0.0:
        img = img + brightness
    if contrast != 1.0:
        mean = img.mean()
        img = (img - mean) * contrast + mean
    if saturation != 1.0:
        gray = np.tensordot(LUMA, img, axes=1)
        img = gray[None] + (img - gray[None]) * saturation
    img = np.clip(img, 0.0, 1.0)
    if hue != 0.0:
        hsv = _rgb_to_hsv(img)
        hsv[0] = (hsv[0] + hue) % 1.0
        img = np.clip(_hsv_to_rgb(hsv), 0.0, 1.0)
    return img.astype(np.float32)


def photometric_augment(img1, img2, params, seed):
    """Perturb brightness, contrast, saturation, and hue, identically on
    both images."""
    img1 = _check_image01(img1, "img1")
    img2 = _check_image01(img2, "img2")
    deltas = sample_photometric(params, seed)
    return apply_photometric(img1, *deltas), apply_photometric(img2, *deltas)


def _resize_bilinear(planes, out_h, out_w):
    """Half-pixel-centered bilinear resize with clamp-to-edge sampling."""
    _, h, w = planes.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    vals = planes.astype(np.float64)
    top = vals[:, y0][:, :, x0] * (1 - fx) + vals[:, y0][:, :, x1] * fx
    bottom = vals[:, y1][:, :, x0] * (1 - fx) + vals[:, y1][:, :, x1] * fx
    return (top * (1 - fy) + bottom * fy).astype(np.float32)


def spatial_warp(img1, img2, gt, sx, sy):
    """Rescale the pair and its ground truth by (sx, sy).

    Flow values scale per axis (u by sx, v by sy). A resampled pixel stays
    valid only if every source pixel contributing to it was valid.
    """
    h, w = img1.shape[1:]
    out_h = max(1, round(h * sy))
    out_w = max(1, round(w * sx))
    img1w = _resize_bilinear(img1, out_h, out_w)
    img2w = _resize_bilinear(img2, out_h, out_w)
    uv = _resize_bilinear(gt.as_array(), out_h, out_w)
    valid = None
    if gt.valid is not None:
        resampled = _resize_bilinear(gt.valid[None].astype(np.float32), out_h, out_w)
        valid = resampled[0] >= 1.0 - 1e-6
    return img1w, img2w, FlowField(uv[0] * sx, uv[1] * sy, valid)


def spatial_augment(img1, img2, gt, params, seed, min_dims=None, max_tries=10):
    """Randomly rescale and stretch the pair; resamples the scale up to
    max_tries times when the result would be smaller than min_dims."""
    img1 = _check_image01(img1, "img1")
    img2 = _check_image01(img2, "img2")
    if img1.shape != img2.shape:
        raise ShapeError(f"image dims differ: {img1.shape} vs {img2.shape}")
    if gt.shape != img1.shape[1:]:
        raise ShapeError(f"gt dims {gt.shape} != image dims {img1.shape[1:]}")
    h, w = img1.shape[1:]
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        scale = rng.uniform(params.min_scale, params.max_scale)
        stretch = rng.uniform(1.0 - params.max_stretch, 1.0 + params.max_stretch)
        sx, sy = scale * stretch, scale
        out_h = max(1, round(h * sy))
        out_w = max(1, round(w * sx))
        if min_dims is None or (out_h >= min_dims[0] and out_w >= min_dims[1]):
            return spatial_warp(img1, img2, gt, sx, sy)
    raise ConfigError(
        f"no scale in [{params.min_scale}, {params.max_scale}] met the "
        f"minimum dims {min_dims} after {max_tries} tries"
    )


def occlusion_erase(img2, params, seed):
    """With the configured probability, fill 1-3 random rectangles of
    image2 with its pre-erase mean color. image1 and the ground truth are
    never touched."""
    img2 = _check_image01(img2, "img2")
    rng = np.random.default_rng(seed)
    out = img2.copy()
    if rng.uniform() >= params.erase_probability:
        return out
    h, w = img2.shape[1:]
    mean_color = img2.reshape(3, -1).mean(axis=1)
    count = int(rng.integers(params.erase_min_rects, params.erase_max_rects + 1))
    for _ in range(count):
        rw = min(int(rng.integers(params.erase_min_size, params.erase_max_size + 1)), w)
        rh = min(int(rng.integers(params.erase_min_size, params.erase_max_size + 1)), h)
        x0 = int(rng.integers(0, w - rw + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        out[:, y0 : y0 + rh, x0 : x0 + rw] = mean_color[:, None, None]
    return out


def random_crop(img1, img2, gt, crop_h, crop_w, seed):
    """Seeded uniform crop applied congruently to both images and gt."""
    h, w = img1.shape[1:]
    if gt.shape != (h, w) or img2.shape != img1.shape:
        raise ShapeError("images and gt must share dims")
    if crop_h > h or crop_w > w:
        raise ShapeError(f"crop {crop_h}x{crop_w} exceeds frame {h}x{w}")
    rng = np.random.default_rng(seed)
    y0 = int(rng.integers(0, h - crop_h + 1))
    x0 = int(rng.integers(0, w - crop_w + 1))
    sl = np.s_[y0 : y0 + crop_h, x0 : x0 + crop_w]
    cropped = FlowField(
        gt.u[sl], gt.v[sl], None if gt.valid is None else gt.valid[sl]
    )
    return img1[:, sl[0], sl[1]].copy(), img2[:, sl[0], sl[1]].copy(), cropped


def load_pipeline_config(path):
    """Parse the key=value config: [dataset:<name>] sections with size and
    weight, plus one [augment] section for AugmentParams overrides."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    specs = []
    for section in parser.sections():
        if section.startswith("dataset:"):
            name = section.split(":", 1)[1]
            try:
                specs.append(
                    DatasetSpec(
                        name=name,
                        size=parser.getint(section, "size"),
                        weight=parser.getint(section, "weight"),
                    )
                )
            except (configparser.Error, ValueError) as exc:
                raise ConfigError(f"bad dataset section [{section}]: {exc}") from exc
    kwargs = {}
    if parser.has_section("augment"):
        fields = {f.name: f.type for f in AugmentParams.__dataclass_fields__.values()}
        for key, value in parser.items("augment"):
            if key not in fields:
                raise ConfigError(f"unknown augment key {key!r}")
            try:
                kwargs[key] = int(value) if fields[key] is int else float(value)
            except ValueError as exc:
                raise ConfigError(f"bad augment value {key}={value!r}") from exc
    return specs, AugmentParams(**kwargs)
