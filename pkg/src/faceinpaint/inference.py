"""Inference pipeline shared by the CLI and the HTTP service.

Handles arbitrary input resolutions by letterboxing (aspect-preserving
resize + pad) to the model resolution, running the nets, then mapping
results back so compositing happens at the native resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generator import InpaintGenerator, forward_generator
from .imaging import (
    CompletedImage,
    CorruptedImage,
    Image,
    LandmarkMap,
    LandmarkSet,
    Mask,
    apply_mask,
    composite,
    render_landmark_map,
)
from .landmark_net import LandmarkNet, predict_landmarks


@dataclass(frozen=True)
class Letterbox:
    """Geometry of an aspect-preserving resize into a square model frame."""

    src_height: int
    src_width: int
    size: int

    @property
    def scale(self) -> float:
        return self.size / max(self.src_height, self.src_width)

    @property
    def out_height(self) -> int:
        return max(1, round(self.src_height * self.scale))

    @property
    def out_width(self) -> int:
        return max(1, round(self.src_width * self.scale))

    @property
    def pad_top(self) -> int:
        return (self.size - self.out_height) // 2

    @property
    def pad_left(self) -> int:
        return (self.size - self.out_width) // 2


def _resize_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) float array."""
    h, w = pixels.shape[:2]
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = pixels[y0][:, x0] * (1 - wx) + pixels[y0][:, x1] * wx
    bottom = pixels[y1][:, x0] * (1 - wx) + pixels[y1][:, x1] * wx
    return (top * (1 - wy) + bottom * wy).astype(pixels.dtype)


def _resize_nearest(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = pixels.shape[:2]
    rows = np.minimum(((np.arange(out_h) + 0.5) * h / out_h).astype(int), h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * w / out_w).astype(int), w - 1)
    return pixels[np.ix_(rows, cols)]


def letterbox_image(image: Image, size: int) -> tuple[Image, Letterbox]:
    box = Letterbox(image.height, image.width, size)
    resized = _resize_bilinear(image.pixels, box.out_height, box.out_width)
    canvas = np.zeros((size, size, 3), dtype=np.float32)
    canvas[
        box.pad_top : box.pad_top + box.out_height,
        box.pad_left : box.pad_left + box.out_width,
    ] = np.clip(resized, -1.0, 1.0)
    return Image(canvas), box


def letterbox_mask(mask: Mask, box: Letterbox) -> Mask:
    resized = _resize_nearest(mask.pixels, box.out_height, box.out_width)
    canvas = np.zeros((box.size, box.size), dtype=np.uint8)
    canvas[
        box.pad_top : box.pad_top + box.out_height,
        box.pad_left : box.pad_left + box.out_width,
    ] = resized
    return Mask(canvas)


def landmarks_to_model_frame(landmarks: LandmarkSet, box: Letterbox) -> LandmarkSet:
    pts = np.array(landmarks.points, dtype=np.float32)
    pts[:, 0] = (pts[:, 0] * box.out_width + box.pad_left) / box.size
    pts[:, 1] = (pts[:, 1] * box.out_height + box.pad_top) / box.size
    return LandmarkSet(pts)


def landmarks_from_model_frame(landmarks: LandmarkSet, box: Letterbox) -> LandmarkSet:
    pts = np.array(landmarks.points, dtype=np.float32)
    pts[:, 0] = (pts[:, 0] * box.size - box.pad_left) / box.out_width
    pts[:, 1] = (pts[:, 1] * box.size - box.pad_top) / box.out_height
    return LandmarkSet(np.clip(pts, 0.0, 1.0))


def unletterbox_pixels(pixels: np.ndarray, box: Letterbox) -> np.ndarray:
    content = pixels[
        box.pad_top : box.pad_top + box.out_height,
        box.pad_left : box.pad_left + box.out_width,
    ]
    return _resize_bilinear(content, box.src_height, box.src_width)


@dataclass
class InpaintPipeline:
    """End-to-end inference over loaded networks.

    The landmark net is optional; without it, landmarks must be supplied by
    the caller (the template-editing path).
    """

    generator: InpaintGenerator
    landmark_net: LandmarkNet | None = None

    @property
    def model_size(self) -> int:
        return self.generator.config.input_size

    def predict(self, image: Image, mask: Mask) -> LandmarkSet:
        """Predict landmarks for the corrupted image, in native normalized
        coordinates."""
        if self.landmark_net is None:
            raise RuntimeError("no landmark model loaded")
        boxed_img, box = letterbox_image(image, self.landmark_net.config.input_size)
        boxed_mask = letterbox_mask(mask, box)
        pred = predict_landmarks(self.landmark_net, apply_mask(boxed_img, boxed_mask))
        return landmarks_from_model_frame(pred, box)

    def inpaint(
        self, image: Image, mask: Mask, landmarks: LandmarkSet | None = None
    ) -> tuple[CompletedImage, LandmarkSet, LandmarkMap]:
        """Inpaint `image` under `mask`; landmarks predicted when absent.

        Returns the native-resolution composite, the landmarks used (native
        normalized coordinates), and the model-frame landmark map.
        """
        if mask.pixels.shape != image.pixels.shape[:2]:
            raise ValueError(
                f"mask {mask.pixels.shape} vs image {image.pixels.shape[:2]}"
            )
        if landmarks is None:
            landmarks = self.predict(image, mask)
        boxed_img, box = letterbox_image(image, self.model_size)
        boxed_mask = letterbox_mask(mask, box)
        model_landmarks = landmarks_to_model_frame(landmarks, box)
        lmap = render_landmark_map(model_landmarks, self.model_size, self.model_size)
        raw = forward_generator(self.generator, apply_mask(boxed_img, boxed_mask), lmap)
        # Composite the model output inside the boxed frame, then map the
        # content back to native resolution and composite once more so the
        # observed region is bit-exact.
        boxed_composite = composite(raw, boxed_img, boxed_mask)
        restored = np.clip(
            unletterbox_pixels(boxed_composite.pixels, box), -1.0, 1.0
        ).astype(np.float32)
        completed = composite(Image(restored), image, mask)
        return completed, landmarks, lmap
