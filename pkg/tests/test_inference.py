import numpy as np
import pytest

from faceinpaint.generator import GeneratorConfig, build_generator
from faceinpaint.imaging import Image, LandmarkSet, Mask
from faceinpaint.inference import (
    InpaintPipeline,
    Letterbox,
    landmarks_from_model_frame,
    landmarks_to_model_frame,
    letterbox_image,
    letterbox_mask,
)
from faceinpaint.landmark_net import LandmarkNetConfig, build_landmark_net


def test_letterbox_geometry_wide_image():
    box = Letterbox(src_height=50, src_width=100, size=64)
    assert box.out_width == 64
    assert box.out_height == 32
    assert box.pad_top == 16 and box.pad_left == 0


def test_letterbox_image_pads_with_zeros():
    rng = np.random.default_rng(0)
    img = Image(rng.uniform(-1, 1, size=(50, 100, 3)).astype(np.float32))
    boxed, box = letterbox_image(img, 64)
    assert boxed.pixels.shape == (64, 64, 3)
    assert not boxed.pixels[: box.pad_top].any()
    assert not boxed.pixels[box.pad_top + box.out_height :].any()


def test_letterbox_mask_preserves_binary_values():
    mask_px = np.zeros((50, 100), dtype=np.uint8)
    mask_px[10:30, 20:60] = 1
    boxed = letterbox_mask(Mask(mask_px), Letterbox(50, 100, 64))
    assert set(np.unique(boxed.pixels)) <= {0, 1}
    assert boxed.pixels.any()


def test_landmark_frame_round_trip():
    rng = np.random.default_rng(1)
    pts = LandmarkSet(rng.uniform(0.1, 0.9, size=(68, 2)).astype(np.float32))
    box = Letterbox(50, 100, 64)
    there = landmarks_to_model_frame(pts, box)
    back = landmarks_from_model_frame(there, box)
    np.testing.assert_allclose(back.points, pts.points, atol=1e-5)


def desk_pipeline():
    gen = build_generator(GeneratorConfig(input_size=64).scaled(4), rng_seed=0)
    lmk = build_landmark_net(LandmarkNetConfig(input_size=64).scaled(4), rng_seed=1)
    return InpaintPipeline(gen, lmk)


def test_pipeline_preserves_observed_region_at_native_resolution():
    pipeline = desk_pipeline()
    rng = np.random.default_rng(2)
    img = Image(rng.uniform(-1, 1, size=(80, 120, 3)).astype(np.float32))
    mask_px = np.zeros((80, 120), dtype=np.uint8)
    mask_px[20:60, 40:90] = 1
    completed, used, _ = pipeline.inpaint(img, Mask(mask_px))
    outside = mask_px == 0
    np.testing.assert_array_equal(completed.pixels[outside], img.pixels[outside])
    assert used.points.shape == (68, 2)


def test_pipeline_without_landmark_net_requires_landmarks():
    gen = build_generator(GeneratorConfig(input_size=64).scaled(4), rng_seed=0)
    pipeline = InpaintPipeline(gen, None)
    rng = np.random.default_rng(3)
    img = Image(rng.uniform(-1, 1, size=(64, 64, 3)).astype(np.float32))
    mask = Mask(np.ones((64, 64), dtype=np.uint8))
    with pytest.raises(RuntimeError, match="landmark"):
        pipeline.inpaint(img, mask)
    template = LandmarkSet(np.full((68, 2), 0.5, dtype=np.float32))
    completed, used, _ = pipeline.inpaint(img, mask, template)
    np.testing.assert_array_equal(used.points, template.points)
