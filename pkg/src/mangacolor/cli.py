"""Command-line surface: feature extraction, segmentation, colorization,
training, super-resolution, and the HTTP service.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .features import (
    DEFAULT_PALETTE_TAU,
    binarize_palette,
    extract_histogram,
    load_feature,
    save_feature,
)
from .models import ColorizationModel, SRModel
from .nn import Tensor
from .panels import layout_to_json, segment_page
from .pipeline import BlendOption, ColorizeRequest, colorize_page, colorize_panel, load_job
from .raster import Encoding, RasterImage, binarize, load_image, resize, save_image
from .train import DotAnnotation, load_train_config, train_loop


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mangacolor", description="Reference-driven manga colorization")
    parser.add_argument("--seed", type=int, default=None, help="override the training config seed")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("extract-feature", help="color feature of a reference image")
    p.add_argument("image")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--palette", action="store_true")
    mode.add_argument("--histogram", action="store_true")
    p.add_argument("--tau", type=float, default=DEFAULT_PALETTE_TAU)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("segment", help="panel layout of a page")
    p.add_argument("page")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("colorize-panel", help="colorize one panel image")
    p.add_argument("panel")
    p.add_argument("--feature", required=True)
    p.add_argument("--dot", action="append", default=[], metavar="X,Y,A,B")
    p.add_argument("--dominant-scale", type=float)
    p.add_argument("--blend", metavar="FEATURE.json:RATIO")
    p.add_argument("--model", required=True)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("colorize-page", help="full page pipeline")
    p.add_argument("page")
    p.add_argument("--job", required=True)
    p.add_argument("--model", help="overrides the job file's model checkpoint")
    p.add_argument("--sr", help="overrides the job file's SR checkpoint")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("train", help="run the training loop")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("superres", help="2x super-resolve an image")
    p.add_argument("image")
    p.add_argument("--model", required=True)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("serve", help="start the revision HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", required=True)
    p.add_argument("--sr", required=True)
    p.add_argument("--persist-dir")
    return parser


def _parse_dot(text: str) -> DotAnnotation:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--dot expects X,Y,A,B, got {text!r}")
    return DotAnnotation(int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]))


def _run(args) -> int:
    if args.command == "extract-feature":
        feature = extract_histogram(load_image(args.image))
        if args.palette or not args.histogram:
            feature = binarize_palette(feature, args.tau)
        save_feature(feature, args.output)
        print(f"wrote {feature.mode} feature ({int(np.count_nonzero(feature.bins))} active bins) to {args.output}")
        return 0

    if args.command == "segment":
        layout = segment_page(binarize(load_image(args.page)))
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(layout_to_json(layout))
        print(f"found {len(layout.panels)} panels; layout written to {args.output}")
        return 0

    if args.command == "colorize-panel":
        model = ColorizationModel.load(args.model)
        blend = None
        if args.blend:
            path, _, ratio = args.blend.rpartition(":")
            if not path:
                raise UsageError("--blend expects FEATURE.json:RATIO")
            blend = BlendOption(load_feature(path), float(ratio))
        req = ColorizeRequest(
            panel=load_image(args.panel),
            feature=load_feature(args.feature),
            dots=[_parse_dot(d) for d in args.dot],
            dominant_scale=args.dominant_scale,
            blend=blend,
        )
        save_image(colorize_panel(req, model), args.output)
        print(f"colorized panel written to {args.output}")
        return 0

    if args.command == "colorize-page":
        job, checkpoints = load_job(args.job)
        job.page = load_image(args.page)
        model_path = args.model or checkpoints.get("model")
        sr_path = args.sr or checkpoints.get("sr")
        if not model_path or not sr_path:
            raise UsageError("model and SR checkpoints must come from the job file or --model/--sr")
        result = colorize_page(job, ColorizationModel.load(model_path), SRModel.load(sr_path))
        save_image(result.page, args.output)
        if args.verbose:
            for i, rect in enumerate(result.layout.panels):
                print(f"  panel {i}: ({rect.x},{rect.y}) {rect.w}x{rect.h}")
        print(f"restored page ({result.page.width}x{result.page.height}, {len(result.layout.panels)} panels) written to {args.output}")
        return 0

    if args.command == "train":
        config, entries = load_train_config(args.config)
        config.out_dir = args.out
        if args.seed is not None:
            config.seed = args.seed
        dataset = [(load_image(path), label) for path, label in entries]
        result = train_loop(config, dataset)
        final = result.reports[-1]
        print(f"trained {config.iterations} iterations; final total loss {final.total:.4f}; checkpoints in {args.out}")
        return 0

    if args.command == "superres":
        sr = SRModel.load(args.model)
        img = resize(load_image(args.image), 224, 224, "bilinear")
        unit = img.data.astype(np.float32).transpose(2, 0, 1)[None] / 255.0
        out = sr.super_resolve(Tensor(unit))
        rgb = np.clip(np.floor(out.data[0].transpose(1, 2, 0) * 255.0 + 0.5), 0, 255).astype(np.uint8)
        save_image(RasterImage(Encoding.RGB8, rgb), args.output)
        print(f"448x448 image written to {args.output}")
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(
            ColorizationModel.load(args.model),
            SRModel.load(args.sr),
            persist_dir=args.persist_dir,
        )
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    raise UsageError("a subcommand is required")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        return _run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
