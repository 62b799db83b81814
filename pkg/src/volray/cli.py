"""Command-line entry points: offline rendering, benchmarking, serving."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .engine import Scene, render_frame, run_benchmark
from .io import (
    VolumeIoError,
    load_slice_stack,
    load_volume,
    resolve_tf_preset,
    save_image,
)
from .raycast import Camera, RaycastConfig, framing_camera

MODE_NAMES = {
    "composite": "compositing",
    "mip": "mip",
    "average": "average",
    "iso": "isosurface",
    "threshold": "threshold",
}


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(tok) for tok in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _parse_vec3(text: str) -> tuple[float, float, float]:
    parts = [float(tok) for tok in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)


def _parse_camera(text: str) -> Camera:
    try:
        sections = text.split(";")
        if len(sections) != 4:
            raise ValueError("expected 'px,py,pz;tx,ty,tz;ux,uy,uz;vfov'")
        pos = _parse_vec3(sections[0])
        target = _parse_vec3(sections[1])
        up = _parse_vec3(sections[2])
        vfov = float(sections[3])
        return Camera(position=pos, target=target, up=up, vfov=vfov)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_workers_list(text: str) -> list[int]:
    try:
        workers = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated worker counts, got {text!r}")
    if not workers or any(w < 1 for w in workers):
        raise argparse.ArgumentTypeError(f"worker counts must be >= 1, got {text!r}")
    return workers


def _add_shared_flags(sub: argparse.ArgumentParser, workers_flag: bool = True) -> None:
    sub.add_argument("--volume", help="volume header file to load")
    sub.add_argument("--slices", help="directory of 2-D slices to stack instead of --volume")
    sub.add_argument("--spacing", type=_parse_vec3, default=(1.0, 1.0, 1.0),
                     help="voxel spacing dx,dy,dz in mm for --slices (default 1,1,1)")
    sub.add_argument("--numeric-sort", action="store_true",
                     help="order slices by embedded numbers instead of lexicographically")
    sub.add_argument("--tf", default="grayscale-ramp",
                     help="transfer-function preset name or JSON path")
    sub.add_argument("--size", type=_parse_size, default=(512, 512), help="image size WxH")
    sub.add_argument("--step", type=float, default=None,
                     help="sampling step in mm (default: min voxel spacing)")
    sub.add_argument("--mode", choices=sorted(MODE_NAMES), default="composite")
    sub.add_argument("--iso", type=float, default=0.5, help="iso value for --mode iso")
    sub.add_argument("--threshold", type=float, default=0.5,
                     help="threshold value for --mode threshold")
    if workers_flag:
        sub.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                         help="render worker count (default: host parallelism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volray",
        description="Software raycaster for volumetric scalar data",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    render = subs.add_parser("render", help="render one frame to an image file")
    _add_shared_flags(render)
    render.add_argument("--out", required=True, help="output image (.png or .ppm)")
    render.add_argument("--camera", type=_parse_camera, default=None,
                        help="'px,py,pz;tx,ty,tz;ux,uy,uz;vfov' (default: framing view down -z)")
    render.set_defaults(func=cmd_render)

    bench = subs.add_parser("bench", help="benchmark frame rendering")
    _add_shared_flags(bench, workers_flag=False)
    bench.add_argument("--workers", type=_parse_workers_list, default=[1, os.cpu_count() or 1],
                       help="comma-separated worker counts, e.g. 1,2,4")
    bench.add_argument("--reps", type=int, default=3, help="repetitions per worker count")
    bench.add_argument("--out", default=None, help="CSV report path (default: stdout)")
    bench.set_defaults(func=cmd_bench)

    serve = subs.add_parser("serve", help="stream frames to a viewer over a WebSocket")
    _add_shared_flags(serve)
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.set_defaults(func=cmd_serve)

    return parser


def _load_scene_volume(args, parser: argparse.ArgumentParser):
    if bool(args.volume) == bool(args.slices):
        parser.error("exactly one of --volume or --slices is required")
    if args.volume:
        return load_volume(args.volume)
    return load_slice_stack(args.slices, spacing=args.spacing, numeric_sort=args.numeric_sort)


def _build_scene(args, parser: argparse.ArgumentParser, camera: Camera | None = None) -> Scene:
    volume = _load_scene_volume(args, parser)
    preset = resolve_tf_preset(args.tf)
    step = args.step if args.step is not None else min(volume.spacing)
    config = RaycastConfig(
        function=MODE_NAMES[args.mode],
        step=step,
        reference_step=preset.reference_step,
        iso_value=args.iso,
        threshold_value=args.threshold,
    )
    if camera is None:
        camera = framing_camera(volume)
    return Scene(volume=volume, tf=preset.to_transfer_function(), camera=camera, config=config)


def cmd_render(args, parser) -> int:
    scene = _build_scene(args, parser, camera=args.camera)
    width, height = args.size
    image, stats = render_frame(scene, width, height, args.workers)
    save_image(image, args.out)
    print(json.dumps(stats.as_dict()))
    return 0


def cmd_bench(args, parser) -> int:
    scene = _build_scene(args, parser)
    width, height = args.size
    report = run_benchmark(scene, width, height, args.workers, args.reps)
    if args.out:
        report.write_csv(args.out)
    else:
        sys.stdout.write(report.to_csv())
    return 0


def cmd_serve(args, parser) -> int:
    from .service import serve_session

    volume = _load_scene_volume(args, parser)
    preset = resolve_tf_preset(args.tf)
    width, height = args.size
    serve_session(
        volume,
        args.port,
        host=args.host,
        tf_preset=preset,
        width=width,
        height=height,
        workers=args.workers,
        step=args.step,
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (VolumeIoError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
