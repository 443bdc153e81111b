"""Clip-consistent spatial transforms with exact box/keypoint propagation.

One parameter draw applies to every frame of a clip, so consecutive frames
never jump between crop windows. The pixel sequence is
resize -> crop -> flip -> rotate -> (resize to final shape) -> mean-subtract,
and annotations are pushed through the identical coordinate maps:

* resize scales points by (W_out / W_in, H_out / H_in); pixels are sampled
  bilinearly in the matching convention (destination pixel centers pulled
  back by the pure scale), so boxes and pixels stay aligned.
* crop translates by -origin, flip maps x to W - x, rotation is about the
  frame center (positive angles turn the image content clockwise on screen).
* boxes map as the axis-aligned hull of their four corners, are clamped to
  the frame, and are dropped (and recorded) when the clamped area falls
  below one square pixel.
* continuous maps (saliency) resample bilinearly like pixels; binary maps
  (fixations) use nearest-neighbor so they stay binary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InfeasibleCrop, ShapeMismatch
from .frame_io import Clip, Frame
from .manifest import Box, Keypoint

CROP_RANDOM = "Random"
CROP_CENTER = "Center"
CROP_NONE = "none"

MIN_BOX_AREA = 1.0  # square pixels; smaller boxes are dropped


@dataclass
class TransformConfig:
    """Geometric/photometric preprocessing parameters. Shapes are (H, W)."""

    resize_shape: tuple[int, int] | None = None
    crop_shape: tuple[int, int] | None = None
    crop_type: str = CROP_NONE
    flip_probability: float = 0.0
    rotation_degrees: float | None = None
    subtract_mean: tuple[float, ...] | None = None  # empty/None = disabled
    final_shape: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.crop_type not in (CROP_RANDOM, CROP_CENTER, CROP_NONE):
            raise InfeasibleCrop(f"crop_type must be Random, Center, or none, got {self.crop_type!r}")
        if not (0.0 <= self.flip_probability <= 1.0):
            raise InfeasibleCrop(f"flip_probability must be in [0, 1], got {self.flip_probability}")
        for name in ("resize_shape", "crop_shape", "final_shape"):
            shape = getattr(self, name)
            if shape is not None:
                shape = (int(shape[0]), int(shape[1]))
                if shape[0] < 1 or shape[1] < 1:
                    raise InfeasibleCrop(f"{name} must be positive, got {shape}")
                setattr(self, name, shape)
        if self.subtract_mean is not None:
            means = tuple(float(m) for m in self.subtract_mean)
            self.subtract_mean = means if means else None
        if self.crop_shape is not None and self.resize_shape is not None:
            if self.crop_shape[0] > self.resize_shape[0] or self.crop_shape[1] > self.resize_shape[1]:
                raise InfeasibleCrop(
                    f"crop_shape {self.crop_shape} exceeds resize_shape {self.resize_shape}"
                )


@dataclass(frozen=True)
class SampledParams:
    """One per-clip draw of the random transform parameters."""

    crop_origin: tuple[int, int] | None = None  # (x, y)
    flip_applied: bool = False
    rotation: float = 0.0


def sample_params(
    cfg: TransformConfig,
    frame_shape: tuple[int, int],
    seed: int,
    clip_id: int,
) -> SampledParams:
    """Draw the per-clip parameters from a stream keyed by (seed, clip_id).

    ``frame_shape`` is the (H, W) the crop operates on, i.e. the post-resize
    shape when a resize is configured. The draw never touches global RNG
    state, so results are independent of worker count and call order.
    """
    h, w = int(frame_shape[0]), int(frame_shape[1])
    rng: np.random.Generator | None = None

    def get_rng() -> np.random.Generator:
        nonlocal rng
        if rng is None:
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(clip_id)]))
        return rng

    origin: tuple[int, int] | None = None
    if cfg.crop_type != CROP_NONE and cfg.crop_shape is not None:
        ch, cw = cfg.crop_shape
        if ch > h or cw > w:
            raise InfeasibleCrop(f"crop {cfg.crop_shape} exceeds frame {(h, w)}")
        if cfg.crop_type == CROP_CENTER:
            origin = ((w - cw) // 2, (h - ch) // 2)
        else:
            r = get_rng()
            origin = (int(r.integers(0, w - cw + 1)), int(r.integers(0, h - ch + 1)))
    flip = False
    if cfg.flip_probability > 0.0:
        flip = bool(get_rng().random() < cfg.flip_probability)
    rotation = float(cfg.rotation_degrees) if cfg.rotation_degrees else 0.0
    return SampledParams(crop_origin=origin, flip_applied=flip, rotation=rotation)


# ---------------------------------------------------------------------------
# Pixel resampling primitives (half-pixel-center convention, edge clamped)


def _resize_image(img: np.ndarray, out_h: int, out_w: int, nearest: bool = False) -> np.ndarray:
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()
    src_y = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    src_x = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    if nearest:
        yi = np.clip(np.floor(src_y + 0.5).astype(np.int64), 0, in_h - 1)
        xi = np.clip(np.floor(src_x + 0.5).astype(np.int64), 0, in_w - 1)
        return img[yi][:, xi].copy()
    src_y = np.clip(src_y, 0.0, in_h - 1.0)
    src_x = np.clip(src_x, 0.0, in_w - 1.0)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (src_y - y0)[:, None, None]
    wx = (src_x - x0)[None, :, None]
    data = img.astype(np.float64)
    top = data[y0][:, x0] * (1 - wx) + data[y0][:, x1] * wx
    bot = data[y1][:, x0] * (1 - wx) + data[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return _cast_like(out, img)


def _rotate_image(img: np.ndarray, degrees: float, nearest: bool = False) -> np.ndarray:
    h, w = img.shape[:2]
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = w / 2.0, h / 2.0
    xs = np.arange(w) + 0.5
    ys = np.arange(h) + 0.5
    dx = xs[None, :] - cx
    dy = ys[:, None] - cy
    # inverse of the forward point map (forward: x' = cx + dx*cos + dy*sin,
    # y' = cy - dx*sin + dy*cos)
    src_x = cx + dx * cos_t - dy * sin_t
    src_y = cy + dx * sin_t + dy * cos_t
    valid = (src_x >= 0.0) & (src_x <= w) & (src_y >= 0.0) & (src_y <= h)
    ax = src_x - 0.5
    ay = src_y - 0.5
    if nearest:
        xi = np.clip(np.floor(ax + 0.5).astype(np.int64), 0, w - 1)
        yi = np.clip(np.floor(ay + 0.5).astype(np.int64), 0, h - 1)
        out = img[yi, xi].astype(np.float64)
    else:
        ax = np.clip(ax, 0.0, w - 1.0)
        ay = np.clip(ay, 0.0, h - 1.0)
        x0 = np.floor(ax).astype(np.int64)
        y0 = np.floor(ay).astype(np.int64)
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        wx = (ax - x0)[..., None]
        wy = (ay - y0)[..., None]
        data = img.astype(np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
            squeeze = True
        else:
            squeeze = False
        out = (
            data[y0, x0] * (1 - wx) * (1 - wy)
            + data[y0, x1] * wx * (1 - wy)
            + data[y1, x0] * (1 - wx) * wy
            + data[y1, x1] * wx * wy
        )
        if squeeze:
            out = out[:, :, 0]
    out = np.where(valid[..., None] if out.ndim == 3 else valid, out, 0.0)
    return _cast_like(out, img)


def _cast_like(out: np.ndarray, ref: np.ndarray) -> np.ndarray:
    if ref.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out.astype(ref.dtype)


# ---------------------------------------------------------------------------
# Transform steps: each knows its own geometry and coordinate map


@dataclass(frozen=True)
class ResizeStep:
    src: tuple[int, int]  # (H, W)
    dst: tuple[int, int]

    @property
    def dst_shape(self) -> tuple[int, int]:
        return self.dst

    def map_point(self, p: tuple[float, float]) -> tuple[float, float]:
        sy = self.dst[0] / self.src[0]
        sx = self.dst[1] / self.src[1]
        return p[0] * sx, p[1] * sy

    def apply_image(self, img: np.ndarray, nearest: bool = False) -> np.ndarray:
        return _resize_image(img, self.dst[0], self.dst[1], nearest=nearest)


@dataclass(frozen=True)
class CropStep:
    origin: tuple[int, int]  # (x, y)
    size: tuple[int, int]  # (H, W)

    @property
    def dst_shape(self) -> tuple[int, int]:
        return self.size

    def map_point(self, p: tuple[float, float]) -> tuple[float, float]:
        return p[0] - self.origin[0], p[1] - self.origin[1]

    def apply_image(self, img: np.ndarray, nearest: bool = False) -> np.ndarray:
        x, y = self.origin
        h, w = self.size
        return img[y : y + h, x : x + w].copy()


@dataclass(frozen=True)
class FlipStep:
    shape: tuple[int, int]  # (H, W)

    @property
    def dst_shape(self) -> tuple[int, int]:
        return self.shape

    def map_point(self, p: tuple[float, float]) -> tuple[float, float]:
        return self.shape[1] - p[0], p[1]

    def apply_image(self, img: np.ndarray, nearest: bool = False) -> np.ndarray:
        return img[:, ::-1].copy()


@dataclass(frozen=True)
class RotateStep:
    degrees: float
    shape: tuple[int, int]  # (H, W)

    @property
    def dst_shape(self) -> tuple[int, int]:
        return self.shape

    def map_point(self, p: tuple[float, float]) -> tuple[float, float]:
        theta = math.radians(self.degrees)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        cx, cy = self.shape[1] / 2.0, self.shape[0] / 2.0
        dx, dy = p[0] - cx, p[1] - cy
        return cx + dx * cos_t + dy * sin_t, cy - dx * sin_t + dy * cos_t

    def apply_image(self, img: np.ndarray, nearest: bool = False) -> np.ndarray:
        return _rotate_image(img, self.degrees, nearest=nearest)


@dataclass(frozen=True)
class MeanSubtractStep:
    means: tuple[float, ...]

    @property
    def dst_shape(self) -> None:
        return None  # photometric: no geometry change

    def map_point(self, p: tuple[float, float]) -> tuple[float, float]:
        return p

    def apply_image(self, img: np.ndarray, nearest: bool = False) -> np.ndarray:
        means = np.asarray(self.means, dtype=np.float32)
        channels = img.shape[2] if img.ndim == 3 else 1
        if means.size not in (1, channels):
            raise ShapeMismatch(f"{means.size} means for {channels} channels")
        return img.astype(np.float32) - means


Step = Union[ResizeStep, CropStep, FlipStep, RotateStep, MeanSubtractStep]
GEOMETRIC_STEPS = (ResizeStep, CropStep, FlipStep, RotateStep)


def transform_point(point: tuple[float, float], step: Step) -> tuple[float, float]:
    """Push one (x, y) point through a single transform step."""
    return step.map_point(point)


def transform_box(box: Box, step: Step) -> Box | None:
    """Push a box through one step: corner hull, clamp, drop if under 1 px^2."""
    corners = [
        (box.xmin, box.ymin),
        (box.xmax, box.ymin),
        (box.xmin, box.ymax),
        (box.xmax, box.ymax),
    ]
    mapped = [step.map_point(c) for c in corners]
    xs = [c[0] for c in mapped]
    ys = [c[1] for c in mapped]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    dst = step.dst_shape
    if dst is not None:
        h, w = dst
        xmin, xmax = max(0.0, xmin), min(float(w), xmax)
        ymin, ymax = max(0.0, ymin), min(float(h), ymax)
    if max(0.0, xmax - xmin) * max(0.0, ymax - ymin) < MIN_BOX_AREA:
        return None
    return replace(box, xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax)


def build_pipeline(
    cfg: TransformConfig,
    input_shape: tuple[int, int],
    params: SampledParams,
) -> list[Step]:
    """Materialize the step list for one clip shape and one parameter draw."""
    shape = (int(input_shape[0]), int(input_shape[1]))
    steps: list[Step] = []
    if cfg.resize_shape is not None and cfg.resize_shape != shape:
        steps.append(ResizeStep(src=shape, dst=cfg.resize_shape))
        shape = cfg.resize_shape
    if cfg.crop_type != CROP_NONE and cfg.crop_shape is not None:
        if params.crop_origin is None:
            raise ShapeMismatch("crop configured but params carry no crop_origin")
        ox, oy = params.crop_origin
        ch, cw = cfg.crop_shape
        if ox < 0 or oy < 0 or ox + cw > shape[1] or oy + ch > shape[0]:
            raise ShapeMismatch(
                f"crop origin {params.crop_origin} size {cfg.crop_shape} outside frame {shape}"
            )
        steps.append(CropStep(origin=(ox, oy), size=cfg.crop_shape))
        shape = cfg.crop_shape
    if params.flip_applied:
        steps.append(FlipStep(shape=shape))
    if params.rotation % 360.0 != 0.0:
        steps.append(RotateStep(degrees=params.rotation, shape=shape))
    if cfg.final_shape is not None and cfg.final_shape != shape:
        steps.append(ResizeStep(src=shape, dst=cfg.final_shape))
        shape = cfg.final_shape
    if cfg.subtract_mean:
        steps.append(MeanSubtractStep(means=cfg.subtract_mean))
    return steps


@dataclass
class AnnotationSet:
    """Per-frame annotations synchronized with a clip.

    ``dropped_boxes[i]`` records, per frame, the indices (into the incoming
    box list) of boxes that a transform pushed below one square pixel.
    """

    boxes: list[list[Box]]
    keypoints: list[list[Keypoint]]
    saliency: list[Frame | None]
    fixations: list[Frame | None]
    dropped_boxes: list[list[int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.boxes)
        if not self.dropped_boxes:
            self.dropped_boxes = [[] for _ in range(n)]
        lengths = {
            len(self.boxes),
            len(self.keypoints),
            len(self.saliency),
            len(self.fixations),
            len(self.dropped_boxes),
        }
        if len(lengths) != 1:
            raise ShapeMismatch(f"annotation lists disagree on clip length: {sorted(lengths)}")

    @classmethod
    def empty(cls, length: int) -> "AnnotationSet":
        return cls(
            boxes=[[] for _ in range(length)],
            keypoints=[[] for _ in range(length)],
            saliency=[None] * length,
            fixations=[None] * length,
        )

    @property
    def length(self) -> int:
        return len(self.boxes)


def apply_clip(
    clip: Clip,
    ann: AnnotationSet,
    cfg: TransformConfig,
    params: SampledParams,
) -> tuple[Clip, AnnotationSet]:
    """Apply the identical step sequence to every frame and its annotations."""
    if ann.length != clip.length:
        raise ShapeMismatch(f"annotation length {ann.length} != clip length {clip.length}")
    steps = build_pipeline(cfg, (clip.height, clip.width), params)
    if not steps:
        return clip, ann

    out_frames = []
    for i in range(clip.length):
        img = clip.data[i]
        for step in steps:
            img = step.apply_image(img)
        out_frames.append(img)
    out_clip = Clip(np.stack(out_frames))

    out_boxes: list[list[Box]] = []
    out_drops: list[list[int]] = []
    out_kps: list[list[Keypoint]] = []
    out_sal: list[Frame | None] = []
    out_fix: list[Frame | None] = []
    for i in range(clip.length):
        boxes: list[Box] = []
        drops: list[int] = []
        for j, box in enumerate(ann.boxes[i]):
            b: Box | None = box
            for step in steps:
                b = transform_box(b, step)
                if b is None:
                    break
            if b is None:
                drops.append(j)
            else:
                boxes.append(b)
        out_boxes.append(boxes)
        out_drops.append(drops)

        kps = []
        for kp in ann.keypoints[i]:
            x, y = kp.x, kp.y
            visible = kp.visible
            for step in steps:
                x, y = step.map_point((x, y))
                dst = step.dst_shape
                if dst is not None and not (0 <= x <= dst[1] and 0 <= y <= dst[0]):
                    visible = False
            kps.append(Keypoint(x=x, y=y, visible=visible))
        out_kps.append(kps)

        out_sal.append(_apply_to_map(ann.saliency[i], steps, nearest=False))
        out_fix.append(_apply_to_map(ann.fixations[i], steps, nearest=True))

    return out_clip, AnnotationSet(
        boxes=out_boxes,
        keypoints=out_kps,
        saliency=out_sal,
        fixations=out_fix,
        dropped_boxes=out_drops,
    )


def _apply_to_map(frame: Frame | None, steps: Sequence[Step], nearest: bool) -> Frame | None:
    if frame is None:
        return None
    img = frame.data
    for step in steps:
        if isinstance(step, MeanSubtractStep):
            continue  # photometric normalization applies to video frames only
        img = step.apply_image(img, nearest=nearest)
    return Frame(img)


def apply_per_frame(clip: Clip, fn: Callable[[Frame], Frame]) -> Clip:
    """Apply an arbitrary frame function to every frame (photometric escape hatch).

    No annotation propagation happens here; the function must keep one output
    shape across frames.
    """
    frames = [fn(f) for f in clip.frames]
    shapes = {f.data.shape for f in frames}
    if len(shapes) != 1:
        raise ShapeMismatch(f"per-frame outputs diverge in shape: {sorted(shapes)}")
    return Clip.from_frames(frames)
