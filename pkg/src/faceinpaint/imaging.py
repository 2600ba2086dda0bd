"""Core image / mask / landmark data model and the compositing rule.

Conventions used everywhere in this package:
  * images are float32 arrays of shape (H, W, 3) with values in [-1, 1]
  * masks are uint8 arrays of shape (H, W) with 1 marking the hole
  * landmarks are 68 (x, y) points normalized to [0, 1]
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

NUM_LANDMARKS = 68

# Standard 68-point groups drawn as polylines. Closed groups get an extra
# segment from the last point back to the first.
LANDMARK_GROUPS = (
    (tuple(range(0, 17)), False),   # face contour
    (tuple(range(17, 22)), False),  # right brow
    (tuple(range(22, 27)), False),  # left brow
    (tuple(range(27, 36)), False),  # nose
    (tuple(range(36, 42)), True),   # right eye
    (tuple(range(42, 48)), True),   # left eye
    (tuple(range(48, 60)), True),   # outer lip
    (tuple(range(60, 68)), True),   # inner lip
)

COVERAGE_LABELS = ("10-20%", "20-30%", "30-40%", "40-50%", "50%+", "center")


class ShapeMismatchError(ValueError):
    """Raised when paired image/mask/landmark shapes disagree."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """A face image; pixels (H, W, 3) float32 in [-1, 1]."""

    pixels: np.ndarray
    source_id: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"image pixels must be (H, W, 3), got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("image pixels must be finite")
        if px.min() < -1.0 or px.max() > 1.0:
            raise ValueError("image pixels must lie in [-1, 1]")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class Mask:
    """Binary hole mask; pixels (H, W) uint8, 1 inside the hole."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"mask pixels must be (H, W), got {px.shape}")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("mask pixels must be 0/1")
        object.__setattr__(self, "pixels", _freeze(px.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def hole_fraction(self) -> float:
        return float(self.pixels.mean())


@dataclass(frozen=True)
class CorruptedImage:
    """Observed image with the hole zeroed out, plus its mask."""

    pixels: np.ndarray
    mask: Mask

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.shape[:2] != self.mask.pixels.shape:
            raise ShapeMismatchError(
                f"corrupted pixels {px.shape[:2]} vs mask {self.mask.pixels.shape}"
            )
        hole = self.mask.pixels.astype(bool)
        if px[hole].any():
            raise ValueError("corrupted image must be zero inside the hole")
        object.__setattr__(self, "pixels", _freeze(px))


@dataclass(frozen=True)
class CompletedImage:
    """Inpainting result after compositing; hole filled, rest untouched."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"completed pixels must be (H, W, 3), got {px.shape}")
        object.__setattr__(self, "pixels", _freeze(px))


@dataclass(frozen=True)
class LandmarkSet:
    """68 (x, y) landmark points, normalized to [0, 1]; clamped on construction."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float32)
        if pts.shape != (NUM_LANDMARKS, 2):
            raise ValueError(f"expected ({NUM_LANDMARKS}, 2) points, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _freeze(np.clip(pts, 0.0, 1.0)))


@dataclass(frozen=True)
class LandmarkMap:
    """Single-channel rasterization of a LandmarkSet; (H, W) uint8 in {0, 1}."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"landmark map must be (H, W), got {px.shape}")
        if not np.isin(px, (0, 1)).all():
            raise ValueError("landmark map pixels must be 0/1")
        object.__setattr__(self, "pixels", _freeze(px.astype(np.uint8)))


@dataclass(frozen=True)
class CoverageBucket:
    """Evaluation bucket keyed by hole coverage (or the center-mask flag)."""

    label: str = field()

    def __post_init__(self):
        if self.label not in COVERAGE_LABELS:
            raise ValueError(f"unknown bucket label {self.label!r}")


def apply_mask(image: Image, mask: Mask) -> CorruptedImage:
    """Zero out the hole region of `image`, keeping the observed part."""
    if image.pixels.shape[:2] != mask.pixels.shape:
        raise ShapeMismatchError(
            f"image {image.pixels.shape[:2]} vs mask {mask.pixels.shape}"
        )
    keep = (1 - mask.pixels).astype(np.float32)[..., None]
    return CorruptedImage(pixels=image.pixels * keep, mask=mask)


def composite(generated: Image, original: Image, mask: Mask) -> CompletedImage:
    """Take hole pixels from `generated` and everything else from `original`.

    Selection is exact (np.where), so the output is bit-equal to `original`
    outside the hole.
    """
    if generated.pixels.shape != original.pixels.shape:
        raise ShapeMismatchError(
            f"generated {generated.pixels.shape} vs original {original.pixels.shape}"
        )
    if original.pixels.shape[:2] != mask.pixels.shape:
        raise ShapeMismatchError(
            f"image {original.pixels.shape[:2]} vs mask {mask.pixels.shape}"
        )
    hole = mask.pixels.astype(bool)[..., None]
    return CompletedImage(pixels=np.where(hole, generated.pixels, original.pixels))


def generate_center_mask(height: int, width: int) -> Mask:
    """Axis-centered rectangular hole of height//2 x width//2 (25% area)."""
    if height < 2 or width < 2:
        raise ValueError(f"degenerate mask dimensions ({height}, {width})")
    hole_h, hole_w = height // 2, width // 2
    top, left = (height - hole_h) // 2, (width - hole_w) // 2
    px = np.zeros((height, width), dtype=np.uint8)
    px[top : top + hole_h, left : left + hole_w] = 1
    return Mask(px)


def generate_block_mask(
    height: int,
    width: int,
    rng_seed: int,
    target_coverage: float,
    tolerance: float = 0.05,
    max_attempts: int = 50,
) -> Mask:
    """Union of random axis-aligned rectangles hitting `target_coverage` +-5pp.

    Pure function of (height, width, rng_seed, target_coverage).
    """
    if not 0.0 < target_coverage < 1.0:
        raise ValueError(f"target coverage must be in (0, 1), got {target_coverage}")
    rng = np.random.default_rng(rng_seed)
    area = height * width
    for _ in range(max_attempts):
        px = np.zeros((height, width), dtype=np.uint8)
        for _ in range(200):
            cov = px.sum() / area
            if cov >= target_coverage - tolerance / 2:
                break
            # Propose a rectangle; shrink the proposal if it would overshoot.
            for _ in range(20):
                rh = int(rng.integers(max(1, height // 8), max(2, height // 2)))
                rw = int(rng.integers(max(1, width // 8), max(2, width // 2)))
                top = int(rng.integers(0, max(1, height - rh)))
                left = int(rng.integers(0, max(1, width - rw)))
                trial = px.copy()
                trial[top : top + rh, left : left + rw] = 1
                if trial.sum() / area <= target_coverage + tolerance:
                    px = trial
                    break
        cov = px.sum() / area
        if abs(cov - target_coverage) <= tolerance:
            return Mask(px)
    raise ValueError(
        f"could not reach coverage {target_coverage:.2f} within "
        f"{max_attempts} attempts"
    )


def _nearest_indices(target: int, source: int) -> np.ndarray:
    # Center-sampling nearest neighbor: target cell centers mapped to source.
    return np.minimum(
        ((np.arange(target) + 0.5) * source / target).astype(np.int64), source - 1
    )


def load_irregular_mask(path: str | Path, height: int = 256, width: int = 256) -> Mask:
    """Load a grayscale mask file, binarize at 127/255, resize nearest-neighbor."""
    try:
        img = PILImage.open(path)
        img.load()
    except Exception as exc:
        raise ValueError(f"unreadable mask file {path}: {exc}") from exc
    if img.mode not in ("L", "1", "I", "I;16"):
        raise ValueError(f"mask file {path} must be grayscale, got mode {img.mode!r}")
    arr = np.asarray(img.convert("L"))
    binary = (arr > 127).astype(np.uint8)
    rows = _nearest_indices(height, binary.shape[0])
    cols = _nearest_indices(width, binary.shape[1])
    return Mask(binary[np.ix_(rows, cols)])


def _to_pixel(coord: float, extent: int) -> int:
    return min(max(int(round(coord * extent)), 0), extent - 1)


def _bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Classic integer Bresenham line from (x0, y0) to (x1, y1), inclusive."""
    points = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def render_landmark_map(landmarks: LandmarkSet, height: int, width: int) -> LandmarkMap:
    """Rasterize the 68 points as 1-pixel polylines through the standard groups."""
    px = np.zeros((height, width), dtype=np.uint8)
    pts = [
        (_to_pixel(float(x), width), _to_pixel(float(y), height))
        for x, y in landmarks.points
    ]
    for indices, closed in LANDMARK_GROUPS:
        chain = list(indices) + ([indices[0]] if closed else [])
        for a, b in zip(chain[:-1], chain[1:]):
            for x, y in _bresenham(*pts[a], *pts[b]):
                px[y, x] = 1
    return LandmarkMap(px)


def coverage_bucket(mask: Mask, is_center: bool = False) -> CoverageBucket:
    """Bucket a mask by hole fraction; the center flag wins over the fraction."""
    if is_center:
        return CoverageBucket("center")
    frac = mask.hole_fraction()
    if frac < 0.1:
        warnings.warn(
            f"hole fraction {frac:.3f} below the evaluated 10% floor; "
            "using the 10-20% bucket",
            stacklevel=2,
        )
        return CoverageBucket("10-20%")
    if frac < 0.2:
        return CoverageBucket("10-20%")
    if frac < 0.3:
        return CoverageBucket("20-30%")
    if frac < 0.4:
        return CoverageBucket("30-40%")
    if frac < 0.5:
        return CoverageBucket("40-50%")
    return CoverageBucket("50%+")


# ---------------------------------------------------------------------------
# File I/O. 8-bit files map linearly to the [-1, 1] pixel convention.
# ---------------------------------------------------------------------------


def to_unit(pixels: np.ndarray) -> np.ndarray:
    """Map [-1, 1] pixels to [0, 1]."""
    return (pixels.astype(np.float32) + 1.0) / 2.0


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """Map 8-bit [0, 255] values to [-1, 1] float32."""
    return arr.astype(np.float32) / 127.5 - 1.0


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    """Map [-1, 1] pixels to 8-bit, rounding to nearest."""
    return np.clip(np.rint((pixels + 1.0) * 127.5), 0, 255).astype(np.uint8)


def load_image(path: str | Path) -> Image:
    """Read an 8-bit RGB PNG (any PIL-readable file) as an Image."""
    try:
        img = PILImage.open(path).convert("RGB")
    except Exception as exc:
        raise ValueError(f"unreadable image file {path}: {exc}") from exc
    return Image(from_uint8(np.asarray(img)), source_id=str(path))


def save_image(image: Image | CompletedImage, path: str | Path) -> None:
    PILImage.fromarray(to_uint8(image.pixels)).save(path)


def load_mask(path: str | Path, height: int | None = None, width: int | None = None) -> Mask:
    """Read an 8-bit grayscale mask (255 = hole); optionally resize."""
    if height is None or width is None:
        try:
            img = PILImage.open(path)
            img.load()
        except Exception as exc:
            raise ValueError(f"unreadable mask file {path}: {exc}") from exc
        height, width = img.size[1], img.size[0]
    return load_irregular_mask(path, height, width)


def save_mask(mask: Mask, path: str | Path) -> None:
    PILImage.fromarray(mask.pixels * np.uint8(255), mode="L").save(path)


def load_landmarks(path: str | Path) -> LandmarkSet:
    """Read landmarks from JSON: an array of 68 [x, y] normalized floats."""
    with open(path) as fh:
        data = json.load(fh)
    return LandmarkSet(np.asarray(data, dtype=np.float32))


def save_landmarks(landmarks: LandmarkSet, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump([[float(x), float(y)] for x, y in landmarks.points], fh)
