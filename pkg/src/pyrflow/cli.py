"""Command-line front end.

Subcommands: init-weights, infer, eval, viz, mix-plan, preprocess-viper,
selftest. Exit codes: 0 success, 1 validation error, 2 I/O error,
3 internal invariant violation. Every command is deterministic given its
flags and seed, and writes only to its declared output paths.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import flow_io, metrics, selftest
from .data_pipeline import build_schedule, format_schedule, load_pipeline_config, \
    viper_sanitize
from .errors import (
    ArchiveError,
    ConfigError,
    EmptyDomainError,
    FlowFormatError,
    PyrflowError,
    ShapeError,
    ValidationError,
)
from .flowfield import FlowField
from .pyramid_flow import estimate_flow
from .weights import ModelConfig, init_weights, load, save

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse maps usage problems to exit code 2; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _read_image(path):
    """Load an 8-bit image as (3, H, W) float32 RGB in [0, 255]."""
    import cv2

    if not Path(path).is_file():
        raise FileNotFoundError(f"no such image: {path}")
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise ValidationError(f"cannot decode image {path}")
    return img[:, :, ::-1].transpose(2, 0, 1).astype(np.float32)


def _write_color_png(path, rgb):
    import cv2

    bgr = rgb[::-1].transpose(1, 2, 0)
    if not cv2.imwrite(str(path), np.ascontiguousarray(bgr)):
        raise OSError(f"cannot write PNG {path}")


def cmd_init_weights(args):
    config = ModelConfig(
        feature_dim=args.feature_dim,
        hidden_dim=args.hidden_dim,
        context_dim=args.context_dim,
        levels=args.levels,
        radius=args.radius,
    )
    save(init_weights(config, args.seed), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_infer(args):
    img1 = _read_image(args.image1)
    img2 = _read_image(args.image2)
    weights = load(args.weights)
    flow, trace = estimate_flow(img1, img2, weights, iterations=args.iterations)
    flow_io.write_flo_file(args.out, flow)
    if args.viz:
        _write_color_png(args.viz, flow_io.flow_to_color(flow))
    if args.trace:
        lines = []
        for stage in trace.stages:
            for i, f in enumerate(stage.flows, start=1):
                mag = f.magnitude()
                lines.append(
                    f"stride={stage.stride} iter={i:02d} "
                    f"mean_mag={float(mag.mean()):.6f} max_mag={float(mag.max()):.6f}"
                )
        Path(args.trace).write_text("".join(line + "\n" for line in lines))
    print(f"wrote {args.out}")
    return EXIT_OK


def _load_field(path, fmt):
    if fmt == "kitti":
        return flow_io.read_kitti_png(path)
    return flow_io.read_flo_file(path)


def _read_occ(path):
    import cv2

    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ValidationError(f"cannot decode occlusion mask {path}")
    return img != 0


def cmd_eval(args):
    ext = ".png" if args.format == "kitti" else ".flo"
    gt_dir = Path(args.gt_dir)
    pred_dir = Path(args.pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory: {d}")
    gt_files = sorted(gt_dir.glob(f"*{ext}"))
    if not gt_files:
        raise ValidationError(f"no {ext} files in {gt_dir}")

    missing = []
    rows = []
    records = []
    for gt_path in gt_files:
        pred_path = pred_dir / gt_path.name
        if not pred_path.exists():
            missing.append(gt_path.name)
            continue
        gt = _load_field(gt_path, args.format)
        pred = _load_field(pred_path, args.format)
        occ = None
        if args.occ:
            occ_path = Path(args.occ) / (gt_path.stem + ".png")
            if not occ_path.exists():
                missing.append(occ_path.name)
                continue
            occ = _read_occ(occ_path)
        report = metrics.evaluate(pred, gt, occ=occ)
        rows.append((gt_path.name, report))
        records.append({"frame": gt_path.name, **report.to_record()})

    if not rows:
        raise ValidationError("no frame pairs were evaluated")

    agg = {
        "frame": "aggregate",
        "frames": len(rows),
        "aepe": float(np.mean([r.aepe for _, r in rows])),
        "fl_all": float(np.mean([r.fl_all for _, r in rows])),
        "wauc": float(np.mean([r.wauc for _, r in rows])),
    }
    records.append(agg)

    header = f"{'frame':<28} {'aepe':>10} {'fl_all':>8} {'wauc':>8}"
    print(header)
    for name, report in rows:
        print(f"{name:<28} {report.aepe:>10.4f} {report.fl_all:>8.3f} "
              f"{report.wauc:>8.3f}")
    print(f"{'aggregate':<28} {agg['aepe']:>10.4f} {agg['fl_all']:>8.3f} "
          f"{agg['wauc']:>8.3f}")

    if args.out:
        with open(args.out, "w") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")

    if missing:
        for name in missing:
            print(f"missing counterpart: {name}", file=sys.stderr)
        if not args.allow_missing:
            return EXIT_IO
    return EXIT_OK


def cmd_viz(args):
    field = flow_io.read_flo_file(args.flow)
    _write_color_png(args.out, flow_io.flow_to_color(field, max_norm=args.max_norm))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_mix_plan(args):
    specs, _ = load_pipeline_config(args.config)
    schedule = build_schedule(specs, args.seed)
    Path(args.out).write_text(format_schedule(schedule))
    print(f"wrote {args.out} ({len(schedule)} records)")
    return EXIT_OK


def cmd_preprocess_viper(args):
    """Sanitize every .flo in in_dir; masks travel as <stem>.valid.png
    sidecars (8-bit, nonzero = valid) next to the copied flow values."""
    import cv2

    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {in_dir}")
    flo_files = sorted(in_dir.glob("*.flo"))
    if not flo_files:
        raise ValidationError(f"no .flo files in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in flo_files:
        field = flow_io.read_flo_file(path)
        sidecar = in_dir / (path.stem + ".valid.png")
        valid = None
        if sidecar.exists():
            mask = cv2.imread(str(sidecar), cv2.IMREAD_GRAYSCALE)
            if mask is None:
                raise ValidationError(f"cannot decode mask {sidecar}")
            valid = mask != 0
        clean = viper_sanitize(
            FlowField(field.u, field.v, valid),
            row_cutoff=args.row_cutoff,
            max_magnitude=args.max_magnitude,
        )
        flow_io.write_flo_file(
            out_dir / path.name, FlowField(clean.u, clean.v)
        )
        ok = cv2.imwrite(
            str(out_dir / (path.stem + ".valid.png")),
            (clean.valid_mask() * np.uint8(255)),
        )
        if not ok:
            raise OSError(f"cannot write mask for {path.name}")
    print(f"sanitized {len(flo_files)} fields into {out_dir}")
    return EXIT_OK


def cmd_selftest(args):
    ok = selftest.run_all()
    return EXIT_OK if ok else EXIT_INTERNAL


def build_parser():
    parser = _Parser(prog="pyrflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-weights", help="create a seeded random weight archive")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-dim", type=int, default=ModelConfig.feature_dim)
    p.add_argument("--hidden-dim", type=int, default=ModelConfig.hidden_dim)
    p.add_argument("--context-dim", type=int, default=ModelConfig.context_dim)
    p.add_argument("--levels", type=int, default=ModelConfig.levels)
    p.add_argument("--radius", type=int, default=ModelConfig.radius)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("infer", help="estimate flow for one image pair")
    p.add_argument("image1")
    p.add_argument("image2")
    p.add_argument("out", help="output .flo path")
    p.add_argument("--weights", required=True)
    p.add_argument("--iterations", type=int, default=12)
    p.add_argument("--viz", help="also write a color rendering PNG")
    p.add_argument("--trace", help="also write per-iteration flow statistics")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--occ", help="directory of occlusion masks (<stem>.png)")
    p.add_argument("--format", choices=("flo", "kitti"), default="flo")
    p.add_argument("--out", help="write per-frame + aggregate JSONL records")
    p.add_argument("--allow-missing", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="render a .flo file to a color PNG")
    p.add_argument("flow")
    p.add_argument("out")
    p.add_argument("--max-norm", type=float, default=None)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("mix-plan", help="emit a balanced multi-dataset schedule")
    p.add_argument("config")
    p.add_argument("out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mix_plan)

    p = sub.add_parser("preprocess-viper", help="sanitize driving-dataset flow")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--row-cutoff", type=int, default=700)
    p.add_argument("--max-magnitude", type=float, default=300.0)
    p.set_defaults(func=cmd_preprocess_viper)

    p = sub.add_parser("selftest", help="run the oracle and invariant suites")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ShapeError, ConfigError, FlowFormatError,
            ArchiveError, EmptyDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PyrflowError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
