"""Command-line front-end. All fusion logic lives in the library modules.

Exit codes: 0 success, 1 environment or I/O trouble, 2 usage or config
mistakes. Machine-readable output goes to stdout as key=value lines;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from .bench import (
    SweepSpace,
    enumerate_configs,
    group_report,
    measure_fuse,
    run_sweep,
    write_grouped_csv,
    GROUP_MODES,
)
from .errors import (
    ConfigurationError,
    ImageIOError,
    InvalidInputError,
    MeasurementError,
)
from .fusion import FusionConfig, FusionMethod, StackingMethod
from .imgcore import (
    ground_truth,
    load_image,
    load_scene,
    random_scene,
    save_image,
    synth_bracket,
)
from .metrics import evaluate
from .weights import WeightConfig

_METHOD_NAMES = tuple(m.value for m in FusionMethod)
_STACKING_NAMES = tuple(s.value for s in StackingMethod)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusebench",
        description="Exposure fusion methods with a benchmarking harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    fuse_p = sub.add_parser(
        "fuse", help="fuse one scene directory into a single image")
    fuse_p.add_argument("scene_dir", help="directory of ev_<label>.png frames")
    fuse_p.add_argument("--method", required=True, choices=_METHOD_NAMES)
    fuse_p.add_argument(
        "--weights", default=None, metavar="LETTERS",
        help="plus-joined weight letters, e.g. C+S+E; S (saturation) only "
             "applies to mertens and ssf-rgb; default: all the method allows")
    fuse_p.add_argument(
        "--frames", type=int, default=1, metavar="N",
        help="how many EV>=0 frames to use, lowest EVs first (1..5)")
    fuse_p.add_argument(
        "--stacking", default="none", choices=_STACKING_NAMES,
        help="reduce the EV>=0 frames to one before fusing; only applicable "
             "when using more than 1 EV>=0 frame")
    fuse_p.add_argument("--depth", type=int, default=None,
                        help="pyramid depth override (mertens, fast-yuv)")
    fuse_p.add_argument("--out", required=True, help="output image path")
    fuse_p.set_defaults(func=cmd_fuse)

    bench_p = sub.add_parser(
        "bench", help="sweep fusion configs over a dataset of scenes")
    bench_p.add_argument("dataset_dir",
                         help="directory of scene folders, each with gt.png")
    bench_p.add_argument(
        "--space", default="full",
        help="'full' for the complete variable space, or a key = value file "
             "with any of: methods, frames, stackings, weights")
    bench_p.add_argument("--repeats", type=int, default=10,
                         help="timed runs per config (median reported)")
    bench_p.add_argument("--out", default="runs.csv",
                         help="records CSV path (appended to when resuming)")
    bench_p.add_argument("--report", default="method_weights",
                         choices=GROUP_MODES, help="grouping for the report")
    bench_p.set_defaults(func=cmd_bench)

    metrics_p = sub.add_parser(
        "metrics", help="compare two images with the full metric suite")
    metrics_p.add_argument("test", help="image under test")
    metrics_p.add_argument("ref", help="reference image")
    metrics_p.set_defaults(func=cmd_metrics)

    synth_p = sub.add_parser(
        "synth", help="generate synthetic exposure-bracket scenes")
    synth_p.add_argument("--scenes", type=int, default=3, metavar="K")
    synth_p.add_argument("--size", default="480x640", metavar="WxH",
                         help="frame size as WIDTHxHEIGHT")
    synth_p.add_argument("--evs", default="-24,0,1,2,3,4",
                         help="comma-separated integer EV labels; write "
                              "--evs=-24,0,1 so the leading dash is not "
                              "read as an option")
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--out", required=True, help="dataset directory")
    synth_p.set_defaults(func=cmd_synth)
    return parser


def cmd_fuse(args: argparse.Namespace) -> int:
    method = FusionMethod(args.method)
    if args.weights is None:
        wcfg = WeightConfig(method.allowed_kinds)
    else:
        wcfg = WeightConfig.from_letters(args.weights)
    cfg = FusionConfig(method=method, weights=wcfg,
                       n_positive=args.frames,
                       stacking=StackingMethod(args.stacking),
                       pyramid_depth=args.depth)
    seq = load_scene(Path(args.scene_dir))
    image, runtime, peak = measure_fuse(seq, cfg, repeats=1)
    save_image(image, Path(args.out))
    print(f"out={args.out}")
    print(f"runtime_s={runtime:.6g}")
    print(f"peak_alloc_bytes={peak}")
    return 0


def parse_space(arg: str) -> SweepSpace:
    """'full', or a line-oriented `key = value` space file.

    Recognized keys: methods, frames, stackings (comma lists) and weights
    (a policy name). Blank lines and # comments are ignored.
    """
    if arg == "full":
        return SweepSpace()
    path = Path(arg)
    if not path.is_file():
        raise ConfigurationError(f"space file not found: {path}")
    kwargs: dict = {}
    for lineno, raw in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigurationError(
                f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key = key.strip()
        value = value.strip()
        try:
            if key == "methods":
                kwargs["methods"] = tuple(
                    FusionMethod(v.strip()) for v in value.split(","))
            elif key == "frames":
                kwargs["n_positive_values"] = tuple(
                    int(v) for v in value.split(","))
            elif key == "stackings":
                kwargs["stackings"] = tuple(
                    StackingMethod(v.strip()) for v in value.split(","))
            elif key == "weights":
                kwargs["weight_policy"] = value
            else:
                raise ConfigurationError(
                    f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
    return SweepSpace(**kwargs)


def cmd_bench(args: argparse.Namespace) -> int:
    if args.repeats < 1:
        raise ConfigurationError(f"repeats must be >= 1, got {args.repeats}")
    space = parse_space(args.space)
    configs = enumerate_configs(space)
    try:
        records = run_sweep(args.dataset_dir, space,
                            repeats=args.repeats, csv_path=args.out)
    except InvalidInputError as exc:
        # an unusable dataset is an environment problem, not a usage one
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not records:
        print("error: the sweep produced no records", file=sys.stderr)
        return 1
    rows, table = group_report(records, group_by=args.report)
    grouped_path = Path(args.out).with_suffix(".grouped.csv")
    write_grouped_csv(rows, grouped_path)
    print(f"scenes={len({r.scene for r in records})}")
    print(f"configs={len(configs)}")
    print(f"records={len(records)}")
    print(f"records_csv={args.out}")
    print(f"grouped_csv={grouped_path}")
    print(table)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    report = evaluate(load_image(Path(args.test)), load_image(Path(args.ref)))
    print(f"ms_ssim={report.ms_ssim:.6f}")
    print(f"psnr_db={report.psnr:.6f}")
    print(f"ergas={report.ergas:.6f}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    if args.scenes < 1:
        raise ConfigurationError(f"scenes must be >= 1, got {args.scenes}")
    m = re.fullmatch(r"(\d+)x(\d+)", args.size)
    if m is None:
        raise ConfigurationError(
            f"size must be WIDTHxHEIGHT, e.g. 480x640, got {args.size!r}")
    width, height = int(m.group(1)), int(m.group(2))
    if width < 1 or height < 1:
        raise ConfigurationError("size must be at least 1x1")
    try:
        evs = sorted(int(v) for v in args.evs.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"bad EV list {args.evs!r}: {exc}") from exc
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    for k in range(args.scenes):
        scene_dir = root / f"scene_{k:02d}"
        scene_dir.mkdir(exist_ok=True)
        spec = random_scene(width, height, evs, seed=args.seed + k)
        for frame in synth_bracket(spec, evs, seed=args.seed + k):
            save_image(frame.image, scene_dir / f"ev_{frame.ev}.png")
        save_image(ground_truth(spec), scene_dir / "gt.png")
    print(f"scenes={args.scenes}")
    print(f"out={root}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MeasurementError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ImageIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
