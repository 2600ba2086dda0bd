"""Datasets of (image, landmarks) pairs.

On disk a dataset is any directory tree holding `<stem>.png` images with
`<stem>.json` landmark files beside them (68 normalized [x, y] pairs).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .imaging import (
    Image,
    LandmarkSet,
    load_image,
    load_landmarks,
    save_image,
    save_landmarks,
)


@dataclass(frozen=True)
class Sample:
    image: Image
    landmarks: LandmarkSet


class FaceDataset(Sequence[Sample]):
    """In-memory sequence of samples."""

    def __init__(self, samples: Sequence[Sample]):
        if not samples:
            raise ValueError("dataset is empty")
        sizes = {s.image.pixels.shape for s in samples}
        if len(sizes) > 1:
            raise ValueError(f"images must share one shape, got {sorted(sizes)}")
        self._samples = list(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, index) -> Sample:
        return self._samples[index]

    def __iter__(self) -> Iterator[Sample]:
        return iter(self._samples)

    @property
    def image_size(self) -> int:
        return self._samples[0].image.height

    def split(self, holdout: int) -> tuple["FaceDataset", "FaceDataset"]:
        """Deterministic (train, holdout) split taking the last N samples."""
        if not 0 < holdout < len(self):
            raise ValueError(f"holdout must be in (0, {len(self)})")
        return (
            FaceDataset(self._samples[:-holdout]),
            FaceDataset(self._samples[-holdout:]),
        )


def load_face_dataset(root: str | Path) -> FaceDataset:
    """Scan a directory tree for <stem>.png / <stem>.json pairs."""
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset directory {root} does not exist")
    samples = []
    for png in sorted(root.rglob("*.png")):
        sidecar = png.with_suffix(".json")
        if not sidecar.exists():
            continue
        samples.append(Sample(load_image(png), load_landmarks(sidecar)))
    if not samples:
        raise ValueError(f"no samples (png + json pairs) found under {root}")
    return FaceDataset(samples)


def save_face_dataset(dataset: Sequence[Sample], root: str | Path) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(dataset):
        save_image(sample.image, root / f"{i:05d}.png")
        save_landmarks(sample.landmarks, root / f"{i:05d}.json")


def synthetic_face_dataset(count: int, size: int, seed: int = 0) -> FaceDataset:
    """Procedural stand-in faces: smooth color fields + jittered landmark
    templates. Used by smokes and tests; not meant to look like faces."""
    rng = np.random.default_rng(seed)
    template = _landmark_template()
    samples = []
    for _ in range(count):
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / size
        freq = rng.uniform(1.0, 3.0, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=(3, 2))
        channels = [
            0.7 * np.sin(2 * np.pi * f * (xx + yy) + p[0])
            + 0.3 * np.cos(2 * np.pi * f * (xx - yy) + p[1])
            for f, p in zip(freq, phase)
        ]
        pixels = np.clip(np.stack(channels, axis=-1), -1, 1).astype(np.float32)
        points = np.clip(
            template + rng.normal(0, 0.02, size=template.shape), 0, 1
        ).astype(np.float32)
        samples.append(Sample(Image(pixels), LandmarkSet(points)))
    return FaceDataset(samples)


def _landmark_template() -> np.ndarray:
    """Rough frontal-face layout for the 68 standard points."""
    pts = np.zeros((68, 2), dtype=np.float32)
    # jaw contour: arc from temple to temple through the chin
    pts[0:17, 0] = np.linspace(0.15, 0.85, 17)
    pts[0:17, 1] = 0.4 + 0.45 * np.sin(np.linspace(0, np.pi, 17))
    # brows
    pts[17:22, 0] = np.linspace(0.22, 0.42, 5)
    pts[17:22, 1] = 0.30
    pts[22:27, 0] = np.linspace(0.58, 0.78, 5)
    pts[22:27, 1] = 0.30
    # nose bridge + base
    pts[27:31, 0] = 0.5
    pts[27:31, 1] = np.linspace(0.35, 0.52, 4)
    pts[31:36, 0] = np.linspace(0.44, 0.56, 5)
    pts[31:36, 1] = 0.56
    # eyes (closed hexagons)
    for start, cx in ((36, 0.32), (42, 0.68)):
        ang = np.linspace(0, 2 * np.pi, 6, endpoint=False)
        pts[start : start + 6, 0] = cx + 0.06 * np.cos(ang)
        pts[start : start + 6, 1] = 0.38 + 0.025 * np.sin(ang)
    # lips
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts[48:60, 0] = 0.5 + 0.12 * np.cos(ang)
    pts[48:60, 1] = 0.72 + 0.05 * np.sin(ang)
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts[60:68, 0] = 0.5 + 0.07 * np.cos(ang)
    pts[60:68, 1] = 0.72 + 0.025 * np.sin(ang)
    return np.clip(pts, 0.02, 0.98)
