"""Self-contained verification suites.

Each suite re-derives expected values with an independent oracle (scalar
loops, brute-force enumeration, hand-assembled bytes) and raises
AssertionError on the first disagreement. ``run_all`` prints one pass/fail
line per suite; the CLI exposes it as the ``selftest`` command.
"""

import math
import struct
import sys
import time

import numpy as np

from .correlation import build_corr_volume, build_pyramid, lookup, max_pyramid_levels
from .data_pipeline import (
    AugmentParams,
    DatasetSpec,
    build_schedule,
    occlusion_erase,
    viper_sanitize,
)
from .errors import FlowFormatError
from .flowfield import FlowField
from .metrics import aepe, evaluate, fl_all, wauc
from .network import LevelContext, convex_upsample
from .pyramid_flow import estimate_flow, run_update_stage
from .weights import ModelConfig, ModelWeights, expected_entries, init_weights, \
    read_archive, write_archive
from . import flow_io, metrics


def _bilinear_scalar(plane, x, y):
    """Reference interpolator over a list-of-lists plane, zero border."""
    h = len(plane)
    w = len(plane[0])
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = x - x0
    fy = y - y0
    acc = 0.0
    for yy, xx, wt in (
        (y0, x0, (1 - fx) * (1 - fy)),
        (y0, x0 + 1, fx * (1 - fy)),
        (y0 + 1, x0, (1 - fx) * fy),
        (y0 + 1, x0 + 1, fx * fy),
    ):
        if 0 <= yy < h and 0 <= xx < w:
            acc += wt * plane[yy][xx]
    return acc


def suite_correlation_oracles():
    """Criterion 1: volume and lookup vs brute-force oracles, 100 pairs."""
    rng = np.random.default_rng(1001)
    for trial in range(100):
        d = int(rng.integers(1, 17))
        h1, w1, h2, w2 = (int(x) for x in rng.integers(2, 9, size=4))
        f1 = rng.standard_normal((d, h1, w1)).astype(np.float32)
        f2 = rng.standard_normal((d, h2, w2)).astype(np.float32)

        vol = build_corr_volume(f1, f2)
        assert vol.shape == (h1 * w1, h2, w2)
        assert vol.size == h1 * w1 * h2 * w2
        scale = 1.0 / math.sqrt(d)
        for y1 in range(h1):
            for x1 in range(w1):
                for y2 in range(h2):
                    for x2 in range(w2):
                        want = float(np.dot(f1[:, y1, x1], f2[:, y2, x2])) * scale
                        got = float(vol[y1 * w1 + x1, y2, x2])
                        assert abs(got - want) <= 1e-5, (
                            f"volume mismatch at trial {trial}: {got} vs {want}"
                        )

        radius = int(rng.integers(0, 4))
        levels = min(int(rng.integers(1, 4)), max_pyramid_levels((h2, w2)))
        pyr = build_pyramid(vol, levels, (h1, w1), feature_dim=d)
        flow = rng.uniform(-4, 4, size=(2, h1, w1)).astype(np.float32)
        got = lookup(pyr, flow, radius).values

        side = 2 * radius + 1
        planes = [
            [pyr.levels[l][q].tolist() for q in range(h1 * w1)]
            for l in range(levels)
        ]
        for l in range(levels):
            scale_l = 1.0 / 2.0**l
            for y in range(h1):
                for x in range(w1):
                    cx = (x + float(flow[0, y, x])) * scale_l
                    cy = (y + float(flow[1, y, x])) * scale_l
                    for dy in range(-radius, radius + 1):
                        for dx in range(-radius, radius + 1):
                            ch = l * side * side + (dy + radius) * side + (dx + radius)
                            want = _bilinear_scalar(
                                planes[l][y * w1 + x], cx + dx, cy + dy
                            )
                            assert abs(float(got[ch, y, x]) - want) <= 1e-5, (
                                f"lookup mismatch at trial {trial}, level {l}"
                            )


def suite_architecture_contract():
    """Criterion 2: output dims, 12+12 iterations over exactly two stages,
    bitwise repeatability."""
    w = init_weights(ModelConfig(), seed=7)
    rng = np.random.default_rng(2002)
    img1 = rng.uniform(0, 255, size=(3, 64, 96)).astype(np.float32)
    img2 = rng.uniform(0, 255, size=(3, 64, 96)).astype(np.float32)

    flow, trace = estimate_flow(img1, img2, w)
    assert flow.shape == (64, 96)
    assert len(trace.stages) == 2, "must run exactly two pyramid stages"
    assert trace.iteration_counts() == [12, 12]
    assert [s.stride for s in trace.stages] == [8, 4]
    assert trace.stages[0].flows[0].shape == (8, 12)
    assert trace.stages[1].flows[0].shape == (16, 24)
    assert np.isfinite(flow.u).all() and np.isfinite(flow.v).all()

    flow2, trace2 = estimate_flow(img1, img2, w)
    assert np.array_equal(flow.u, flow2.u) and np.array_equal(flow.v, flow2.v), (
        "repeated runs must be bitwise identical"
    )
    for s1, s2 in zip(trace.stages, trace2.stages):
        for f1, f2 in zip(s1.flows, s2.flows):
            assert np.array_equal(f1.u, f2.u) and np.array_equal(f1.v, f2.v)


class _RecordingWeights(ModelWeights):
    def __init__(self, base):
        super().__init__(base.config, base.entries)
        self.accessed = set()

    def get(self, name):
        self.accessed.add(name)
        return super().get(name)


def suite_weight_sharing():
    """Criterion 3: one tensor per update-block name; both stages read the
    same update entries."""
    cfg = ModelConfig()
    w = init_weights(cfg, seed=3)
    plan = expected_entries(cfg)
    update_names = {n for n in plan if n.startswith("update.")}
    archive_update = {n for n in w.entries if n.startswith("update.")}
    assert archive_update == update_names, "update entries must exist exactly once"
    # no per-stage copies hiding under other prefixes
    assert all(
        n.startswith(("fnet.", "cnet.", "update.")) for n in w.entries
    ), "unexpected entry prefix"

    rng = np.random.default_rng(3003)
    accessed = []
    for h, wdt in ((8, 12), (16, 24)):
        rec = _RecordingWeights(w)
        f1 = rng.standard_normal((cfg.feature_dim, h, wdt)).astype(np.float32)
        f2 = rng.standard_normal((cfg.feature_dim, h, wdt)).astype(np.float32)
        pyr = build_pyramid(
            build_corr_volume(f1, f2), min(cfg.levels, max_pyramid_levels((h, wdt))),
            (h, wdt), cfg.feature_dim,
        )
        ctx = LevelContext(
            hidden=np.tanh(rng.standard_normal((cfg.hidden_dim, h, wdt))).astype(
                np.float32
            ),
            context=np.abs(rng.standard_normal((cfg.context_dim, h, wdt))).astype(
                np.float32
            ),
        )
        run_update_stage(pyr, ctx, np.zeros((2, h, wdt), np.float32), rec, 2)
        accessed.append({n for n in rec.accessed if n.startswith("update.")})
    assert accessed[0] == accessed[1], "stages must consume identical update entries"


def suite_convex_upsample():
    """Criterion 4: constant invariance, convexity bounds, scalar oracle."""
    rng = np.random.default_rng(4004)

    flow = np.empty((2, 5, 6), np.float32)
    flow[0] = 0.7
    flow[1] = -1.3
    logits = rng.standard_normal((144, 5, 6)).astype(np.float32)
    up = convex_upsample(flow, logits, 4)
    assert up.shape == (2, 20, 24)
    assert np.abs(up[0] - 4 * 0.7).max() <= 1e-5
    assert np.abs(up[1] - 4 * (-1.3)).max() <= 1e-5

    for _ in range(10):
        h, w = (int(x) for x in rng.integers(2, 9, size=2))
        flow = rng.uniform(-5, 5, size=(2, h, w)).astype(np.float32)
        logits = rng.uniform(-3, 3, size=(144, h, w)).astype(np.float32)
        up = convex_upsample(flow, logits, 4)
        flow_l = flow.tolist()
        for c in range(2):
            for oy in range(4 * h):
                for ox in range(4 * w):
                    i, a = divmod(oy, 4)
                    j, b = divmod(ox, 4)
                    sub = a * 4 + b
                    raw = [float(logits[k * 16 + sub, i, j]) for k in range(9)]
                    m = max(raw)
                    exps = [math.exp(v - m) for v in raw]
                    total = sum(exps)
                    neigh = []
                    for k in range(9):
                        ny = min(max(i + k // 3 - 1, 0), h - 1)
                        nx = min(max(j + k % 3 - 1, 0), w - 1)
                        neigh.append(flow_l[c][ny][nx])
                    want = 4.0 * sum(
                        e / total * val for e, val in zip(exps, neigh)
                    )
                    got = float(up[c, oy, ox])
                    assert abs(got - want) <= 1e-5, "upsample oracle mismatch"
                    lo, hi = 4.0 * min(neigh), 4.0 * max(neigh)
                    assert lo - 1e-5 <= got <= hi + 1e-5, "convexity violated"


def _sinusoid(x, y):
    """Bandlimited 3-channel test pattern, analytic at any real (x, y)."""
    base = [
        127.5 + 55.0 * np.sin(2 * np.pi * (1.7 * x / 96 + 0.9 * y / 64) + 0.3),
        127.5 + 45.0 * np.cos(2 * np.pi * (0.8 * x / 96 - 1.4 * y / 64) + 1.1),
        127.5 + 50.0 * np.sin(2 * np.pi * (2.3 * x / 96 + 0.4 * y / 64) + 2.0),
    ]
    return np.stack(base).astype(np.float32)


def suite_end_to_end_synthetic():
    """Criterion 5: full pipeline on a known constant translation; metric
    agrees with a scalar recomputation."""
    h, w = 64, 96
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    du, dv = 1.5, -0.75
    img1 = _sinusoid(gx, gy)
    img2 = _sinusoid(gx - du, gy - dv)

    weights = init_weights(ModelConfig(), seed=11)
    reread = read_archive(write_archive(weights))
    assert reread.checksum() == weights.checksum(), "archive must round-trip"

    pred, trace = estimate_flow(img1, img2, weights)
    assert np.isfinite(pred.u).all() and np.isfinite(pred.v).all()
    assert trace.iteration_counts() == [12, 12]

    gt = FlowField(np.full((h, w), du, np.float32), np.full((h, w), dv, np.float32))
    reported = aepe(pred, gt)
    acc = 0.0
    for y in range(h):
        for x in range(w):
            acc += math.hypot(
                float(pred.u[y, x]) - du, float(pred.v[y, x]) - dv
            )
    assert abs(reported - acc / (h * w)) <= 1e-6, "AEPE must match scalar recompute"


def suite_metrics_battery():
    """Criterion 6: outlier truth table, WAUC extremes, region partition
    consistency over 1000 random fields."""
    ones = np.ones((4, 5), np.float32)

    gt = FlowField(0 * ones, 0 * ones)
    pred = FlowField(2.9 * ones, 0 * ones)
    assert fl_all(pred, gt) == 0.0, "epe 2.9 must not be an outlier"

    gt = FlowField(100 * ones, 0 * ones)
    pred = FlowField(104 * ones, 0 * ones)
    assert fl_all(pred, gt) == 0.0, "epe 4 on magnitude 100 must pass the 5% test"

    gt = FlowField(10 * ones, 0 * ones)
    pred = FlowField(14 * ones, 0 * ones)
    assert fl_all(pred, gt) == 100.0, "epe 4 on magnitude 10 is an outlier"

    assert wauc(gt, gt) == 100.0
    far = FlowField(gt.u + 6.0, gt.v)
    assert wauc(far, gt) == 0.0

    # single-pixel WAUC against direct summation over the 100 thresholds
    one = np.ones((1, 1), np.float32)
    got = wauc(FlowField(2.5 * one, 0 * one), FlowField(0 * one, 0 * one))
    num = sum((1 - (i - 1) / 100) * (1.0 if 2.5 <= i * 0.05 else 0.0)
              for i in range(1, 101))
    den = sum(1 - (i - 1) / 100 for i in range(1, 101))
    assert abs(got - 100 * num / den) <= 1e-9

    rng = np.random.default_rng(6006)
    for _ in range(1000):
        hh, ww = (int(x) for x in rng.integers(2, 9, size=2))
        gt = FlowField(
            rng.uniform(-80, 80, (hh, ww)).astype(np.float32),
            rng.uniform(-80, 80, (hh, ww)).astype(np.float32),
            rng.uniform(size=(hh, ww)) < 0.8,
        )
        if not gt.valid.any():
            gt.valid[0, 0] = True
        pred = FlowField(
            gt.u + rng.uniform(-5, 5, (hh, ww)).astype(np.float32),
            gt.v + rng.uniform(-5, 5, (hh, ww)).astype(np.float32),
        )
        report = evaluate(pred, gt)
        total_px = 0
        weighted = 0.0
        for name in ("s0-10", "s10-60", "s60+"):
            stat = report.regions[name]
            total_px += stat.pixels
            if stat.pixels:
                weighted += stat.aepe * stat.pixels
        assert total_px == report.pixel_count, "s-regions must partition valid pixels"
        assert abs(weighted / total_px - report.aepe) <= 1e-6, (
            "AEPE must equal the pixel-weighted mean of s-region AEPEs"
        )


def suite_flow_formats():
    """Criterion 7: lossless .flo round trip, golden 1x1 bytes, 16-bit
    quantization bound."""
    rng = np.random.default_rng(7007)
    field = FlowField(
        rng.standard_normal((5, 7)).astype(np.float32) * 100,
        rng.standard_normal((5, 7)).astype(np.float32) * 100,
    )
    back = flow_io.read_flo(flow_io.write_flo(field))
    assert np.array_equal(back.u, field.u) and np.array_equal(back.v, field.v)

    tiny = FlowField(np.array([[1.0]], np.float32), np.array([[-2.0]], np.float32))
    blob = flow_io.write_flo(tiny)
    golden = (
        struct.pack("<f", 202021.25)
        + struct.pack("<i", 1)
        + struct.pack("<i", 1)
        + struct.pack("<f", 1.0)
        + struct.pack("<f", -2.0)
    )
    assert len(blob) == 20 and blob == golden, "1x1 .flo bytes must match oracle"

    try:
        flow_io.read_flo(struct.pack("<f", 0.0) + blob[4:])
        raise AssertionError("zero magic must be rejected")
    except FlowFormatError:
        pass

    vals = rng.uniform(-400, 400, size=(2, 100, 100)).astype(np.float32)
    field = FlowField(vals[0], vals[1])
    back = flow_io.decode_kitti_planes(flow_io.encode_kitti_planes(field))
    assert np.abs(back.u - field.u).max() <= 1 / 128 + 1e-9
    assert np.abs(back.v - field.v).max() <= 1 / 128 + 1e-9
    assert back.valid.all()


def suite_data_pipeline():
    """Criterion 8: exact schedule counts, sanitizer predicate, erase
    frequency."""
    specs = [
        DatasetSpec("sintel_clean", 10, 50),
        DatasetSpec("sintel_final", 10, 50),
        DatasetSpec("kitti", 10, 500),
        DatasetSpec("hd1k", 10, 2),
        DatasetSpec("viper", 10, 1),
    ]
    schedule = build_schedule(specs, seed=17)
    assert len(schedule) == 6030
    counts = {}
    for name, _ in schedule:
        counts[name] = counts.get(name, 0) + 1
    assert counts == {
        "sintel_clean": 500, "sintel_final": 500, "kitti": 5000,
        "hd1k": 20, "viper": 10,
    }

    rng = np.random.default_rng(8008)
    h, w = 800, 6
    u = rng.uniform(-400, 400, (h, w)).astype(np.float32)
    v = rng.uniform(-400, 400, (h, w)).astype(np.float32)
    u[0, 0], v[0, 0] = 300.0, 0.0  # boundary magnitude stays valid
    u[0, 1], v[0, 1] = 300.0001, 0.0
    gt = viper_sanitize(FlowField(u, v))
    mag = gt.magnitude()
    rows = np.arange(h)[:, None] * np.ones((1, w))
    assert not (gt.valid & (mag > 300.0)).any()
    assert not (gt.valid & (rows >= 700)).any()
    assert gt.valid[0, 0] and not gt.valid[0, 1]
    assert np.array_equal(gt.u, u) and np.array_equal(gt.v, v), "values untouched"
    again = viper_sanitize(gt)
    assert np.array_equal(again.valid, gt.valid), "sanitize must be idempotent"

    params = AugmentParams(erase_min_size=4, erase_max_size=8)
    img = np.random.default_rng(5).uniform(0.05, 0.95, (3, 16, 16)).astype(np.float32)
    erased = 0
    for seed in range(10000):
        out = occlusion_erase(img, params, seed)
        if not np.array_equal(out, img):
            erased += 1
    rate = erased / 10000
    assert abs(rate - 0.5) <= 0.02, f"erase frequency {rate} outside 0.5 +/- 0.02"


SUITES = [
    ("correlation-oracles", suite_correlation_oracles),
    ("architecture-contract", suite_architecture_contract),
    ("weight-sharing", suite_weight_sharing),
    ("convex-upsample", suite_convex_upsample),
    ("end-to-end-synthetic", suite_end_to_end_synthetic),
    ("metrics-battery", suite_metrics_battery),
    ("flow-formats", suite_flow_formats),
    ("data-pipeline", suite_data_pipeline),
]


def run_all(stream=None):
    """Run every suite; print one pass/fail line each. True iff all pass."""
    stream = stream or sys.stdout
    all_ok = True
    for name, fn in SUITES:
        start = time.perf_counter()
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report and continue
            all_ok = False
            print(f"FAIL {name}: {exc}", file=stream)
            continue
        print(f"PASS {name} ({time.perf_counter() - start:.1f}s)", file=stream)
    return all_ok
