"""Deterministic synthetic dataset generator: moving colored squares.

Each video is a square bouncing over a noisy dark background. The square
color encodes the action class, the per-frame box tracks the square, a
keypoint and a binary fixation map mark its center, and a continuous saliency
map is a Gaussian blob around the center. Same seed, same bytes.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frame_io import FRAME_INDEX_DIGITS, Frame, encode_image
from .manifest import (
    Box,
    DatasetManifest,
    FrameAnnotation,
    Keypoint,
    VideoRecord,
    save_manifest,
)


@dataclass
class SynthSpec:
    n_videos: int = 12
    length_range: tuple[int, int] = (24, 40)
    shape: tuple[int, int] = (48, 48)  # (height, width)
    n_classes: int = 3
    seed: int = 0
    train_fraction: float = 2.0 / 3.0  # leading videos are train, the rest val


def class_colors(n_classes: int) -> list[tuple[int, int, int]]:
    """Evenly spaced hues, one saturated RGB color per class."""
    colors = []
    for i in range(n_classes):
        r, g, b = colorsys.hsv_to_rgb(i / n_classes, 0.85, 0.9)
        colors.append((int(round(r * 255)), int(round(g * 255)), int(round(b * 255))))
    return colors


def _reflect(pos: float, vel: float, lo: float, hi: float) -> tuple[float, float]:
    pos += vel
    while pos < lo or pos > hi:
        if pos < lo:
            pos = 2 * lo - pos
        else:
            pos = 2 * hi - pos
        vel = -vel
    return pos, vel


def generate_synthetic_dataset(spec: SynthSpec, out_dir: Path | str) -> DatasetManifest:
    """Write frames, maps, and manifest.json under ``out_dir``; return the manifest.

    The output is a pure function of ``spec``: per-video RNG streams are
    spawned from the seed, so regenerating with the same spec produces
    byte-identical files.
    """
    if spec.n_videos < 1 or spec.n_classes < 1:
        raise ValueError("n_videos and n_classes must be positive")
    lo, hi = spec.length_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad length_range {spec.length_range}")
    height, width = spec.shape
    if height < 12 or width < 12:
        raise ValueError("frames smaller than 12x12 leave no room for a moving square")

    out = Path(out_dir)
    palette = class_colors(spec.n_classes)
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_videos)
    n_train = round(spec.n_videos * spec.train_fraction)

    records: list[VideoRecord] = []
    for vi, child in enumerate(children):
        rng = np.random.default_rng(child)
        length = int(rng.integers(lo, hi + 1))
        side = int(rng.integers(max(4, min(height, width) // 6), min(height, width) // 3 + 1))
        x = float(rng.uniform(0, width - side))
        y = float(rng.uniform(0, height - side))
        vx = float(rng.uniform(0.5, 2.5)) * (1.0 if rng.random() < 0.5 else -1.0)
        vy = float(rng.uniform(0.5, 2.5)) * (1.0 if rng.random() < 0.5 else -1.0)
        label = vi % spec.n_classes
        color = np.array(palette[label], dtype=np.uint8)

        video_rel = f"videos/{vi:04d}"
        maps_rel = f"maps/{vi:04d}"
        video_dir = out / video_rel
        maps_dir = out / maps_rel
        video_dir.mkdir(parents=True, exist_ok=True)
        maps_dir.mkdir(parents=True, exist_ok=True)

        anns: list[FrameAnnotation] = []
        for t in range(length):
            xi = int(round(min(max(x, 0.0), width - side)))
            yi = int(round(min(max(y, 0.0), height - side)))
            img = 12 + rng.integers(0, 33, size=(height, width, 3)).astype(np.uint8)
            img[yi : yi + side, xi : xi + side] = color
            stem = f"{t:0{FRAME_INDEX_DIGITS}d}"
            (video_dir / f"{stem}.ppm").write_bytes(encode_image(Frame(img)))

            cx = xi + side / 2.0
            cy = yi + side / 2.0
            ys, xs = np.mgrid[0:height, 0:width]
            d2 = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2
            sigma = side / 2.0
            sal = np.rint(255.0 * np.exp(-d2 / (2.0 * sigma * sigma))).astype(np.uint8)
            fix = np.zeros((height, width), dtype=np.uint8)
            fix[min(int(cy), height - 1), min(int(cx), width - 1)] = 255
            sal_rel = f"{maps_rel}/sal_{stem}.pgm"
            fix_rel = f"{maps_rel}/fix_{stem}.pgm"
            (out / sal_rel).write_bytes(encode_image(Frame(sal)))
            (out / fix_rel).write_bytes(encode_image(Frame(fix)))

            anns.append(
                FrameAnnotation(
                    index=t,
                    boxes=[Box(label=label, track=0, xmin=float(xi), ymin=float(yi), xmax=float(xi + side), ymax=float(yi + side))],
                    keypoints=[Keypoint(x=cx, y=cy, visible=True)],
                    saliency_map=sal_rel,
                    fixations=fix_rel,
                    word_labels=[(label, 0)],
                )
            )
            x, vx = _reflect(x, vx, 0.0, float(width - side))
            y, vy = _reflect(y, vy, 0.0, float(height - side))

        records.append(
            VideoRecord(
                path=video_rel,
                length=length,
                width=width,
                height=height,
                split="train" if vi < n_train else "val",
                action_label=label,
                frames=anns,
            )
        )

    manifest = DatasetManifest(videos=records, extras={})
    save_manifest(manifest, out / "manifest.json")
    manifest.base_dir = out
    return manifest
