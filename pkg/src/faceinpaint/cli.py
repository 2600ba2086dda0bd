"""Command-line entry points: training, inpainting, evaluation, augmentation,
and the inference service."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np


def _load_config(args, **overrides):
    from .config import load_train_config

    return load_train_config(
        getattr(args, "config", None), env=dict(os.environ), **overrides
    )


def _cmd_train_landmarks(args) -> int:
    from .data import load_face_dataset
    from .training import train_landmark_module

    config = _load_config(args)
    dataset = load_face_dataset(args.data)
    ckpt = train_landmark_module(dataset, config, out_dir=args.out,
                                 resume_from=args.resume)
    print(f"trained landmark module to step {ckpt.step}; checkpoint in {args.out}")
    return 0


def _cmd_train_inpaint(args) -> int:
    from .checkpoint import load_checkpoint
    from .data import load_face_dataset
    from .training import load_landmark_net, train_inpaint_module

    config = _load_config(args)
    dataset = load_face_dataset(args.data)
    landmark_net = None
    if args.landmark_checkpoint:
        landmark_net = load_landmark_net(load_checkpoint(args.landmark_checkpoint))
    ckpt = train_inpaint_module(
        dataset,
        config,
        landmark_source=args.landmark_source,
        landmark_net=landmark_net,
        out_dir=args.out,
        resume_from=args.resume,
    )
    print(f"trained inpaint module to step {ckpt.step}; checkpoint in {args.out}")
    return 0


def _overlay_landmarks(corrupted_pixels: np.ndarray, lmap_pixels: np.ndarray):
    from .imaging import Image

    overlay = np.array(corrupted_pixels)
    overlay[lmap_pixels == 1] = (-1.0, 1.0, -1.0)  # green landmark lines
    return Image(overlay)


def _build_pipeline(inpaint_ckpt_path, landmark_ckpt_path):
    from .checkpoint import load_checkpoint
    from .inference import InpaintPipeline
    from .training import load_inpaint_nets, load_landmark_net

    generator, _ = load_inpaint_nets(load_checkpoint(inpaint_ckpt_path))
    landmark_net = None
    if landmark_ckpt_path:
        landmark_net = load_landmark_net(load_checkpoint(landmark_ckpt_path))
    return InpaintPipeline(generator, landmark_net)


def _cmd_inpaint(args) -> int:
    from .imaging import (
        apply_mask,
        load_image,
        load_landmarks,
        load_mask,
        render_landmark_map,
        save_image,
    )
    from .inference import landmarks_to_model_frame, letterbox_image

    pipeline = _build_pipeline(args.checkpoint, args.landmark_checkpoint)
    image = load_image(args.image)
    mask = load_mask(args.mask, image.height, image.width)
    landmarks = load_landmarks(args.landmarks) if args.landmarks else None
    if landmarks is None and pipeline.landmark_net is None:
        raise SystemExit(
            "inpaint: need --landmarks or --landmark-checkpoint to obtain landmarks"
        )
    completed, used, _ = pipeline.inpaint(image, mask, landmarks)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_image(completed, out)

    # Landmark overlay on the corrupted input, rendered at native resolution.
    lmap_native = render_landmark_map(used, image.height, image.width)
    overlay = _overlay_landmarks(apply_mask(image, mask).pixels, lmap_native.pixels)
    overlay_path = out.with_name(out.stem + "_landmarks" + out.suffix)
    save_image(overlay, overlay_path)
    print(f"wrote {out} and {overlay_path}")
    return 0


def _cmd_evaluate(args) -> int:
    from .data import load_face_dataset
    from .inference import InpaintPipeline
    from .metrics import build_mask_suite, evaluate
    from .imaging import CorruptedImage

    pipeline = _build_pipeline(args.checkpoint, args.landmark_checkpoint)
    dataset = load_face_dataset(args.data)
    size = dataset.image_size
    suite = build_mask_suite(size, size, seed=args.seed)

    def generator_fn(corrupted: CorruptedImage, lmap):
        from .generator import forward_generator

        return forward_generator(pipeline.generator, corrupted, lmap)

    if pipeline.landmark_net is not None:
        from .landmark_net import predict_landmarks

        def landmark_fn(corrupted):
            return predict_landmarks(pipeline.landmark_net, corrupted)

    else:
        from .imaging import LandmarkSet

        def landmark_fn(corrupted):
            return LandmarkSet(np.full((68, 2), 0.5, dtype=np.float32))

    report = evaluate(generator_fn, landmark_fn, dataset, suite)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(out)
    print(report.format_table())
    print(f"wrote {out}")
    return 0


def _cmd_augment(args) -> int:
    from .augmentation import write_augmented_dataset
    from .checkpoint import load_checkpoint
    from .data import load_face_dataset
    from .training import load_inpaint_nets

    generator, _ = load_inpaint_nets(load_checkpoint(args.checkpoint))
    dataset = load_face_dataset(args.data)
    manifest = write_augmented_dataset(dataset, generator, args.out, seed=args.seed)
    print(f"wrote {len(dataset)} augmented pairs; manifest at {manifest}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        inpaint_checkpoint=args.checkpoint,
        landmark_checkpoint=args.landmark_checkpoint,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceinpaint",
        description="Landmark-guided face inpainting toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="flat key=value training config file")
        p.add_argument("--resume", help="checkpoint to resume from")

    p = sub.add_parser("train-landmarks", help="train the landmark predictor")
    p.add_argument("--data", required=True, help="dataset directory (png+json pairs)")
    p.add_argument("--out", required=True, help="output directory")
    add_config(p)
    p.set_defaults(func=_cmd_train_landmarks)

    p = sub.add_parser("train-inpaint", help="train the inpainting GAN")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--landmark-checkpoint", help="for --landmark-source predicted")
    p.add_argument(
        "--landmark-source",
        choices=("ground_truth", "predicted"),
        default="ground_truth",
    )
    add_config(p)
    p.set_defaults(func=_cmd_train_inpaint)

    p = sub.add_parser("inpaint", help="inpaint one image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True, help="grayscale PNG, 255 = hole")
    p.add_argument("--landmarks", help="optional landmark JSON (bypasses prediction)")
    p.add_argument("--checkpoint", required=True, help="inpaint checkpoint")
    p.add_argument("--landmark-checkpoint", help="landmark checkpoint")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("evaluate", help="bucketed PSNR/SSIM/FID evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--landmark-checkpoint")
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("augment", help="write an augmented dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("serve", help="start the inference service")
    p.add_argument("--checkpoint", help="inpaint checkpoint")
    p.add_argument("--landmark-checkpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", help="serve the editor UI from this directory")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # one-line diagnostic, never a stack trace
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
