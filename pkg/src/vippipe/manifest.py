"""The JSON dataset description: videos, per-frame annotations, validation.

Schema (one object per dataset)::

    {"videos": [{"path": ..., "length": ..., "width": ..., "height": ...,
                 "split": "train|val|test", "action_label": ...,
                 "frames": [{"index": ..., "boxes": [...], "keypoints": [...],
                             "saliency_map": ..., "fixations": ...,
                             "word_labels": [[word, box], ...]}, ...]}, ...]}

Unknown keys at the top, video, and frame levels are preserved in ``extras``
bags and written back verbatim, so the format stays open to new annotation
kinds. Box coordinates are continuous pixels; rounding happens only at
rasterization/metric boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ParseError, SchemaError

SPLITS = ("train", "val", "test")

_NUMERIC = (int, float)


@dataclass
class Box:
    """Axis-aligned box with corners (xmin, ymin), (xmax, ymax) in pixels."""

    label: int
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    track: int | None = None

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "label": self.label,
            "xmin": self.xmin,
            "ymin": self.ymin,
            "xmax": self.xmax,
            "ymax": self.ymax,
        }
        if self.track is not None:
            out["track"] = self.track
        return out

    @classmethod
    def from_json(cls, obj: Any, where: str) -> "Box":
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: box must be an object")
        return cls(
            label=_field(obj, "label", where, int),
            xmin=float(_field(obj, "xmin", where, _NUMERIC)),
            ymin=float(_field(obj, "ymin", where, _NUMERIC)),
            xmax=float(_field(obj, "xmax", where, _NUMERIC)),
            ymax=float(_field(obj, "ymax", where, _NUMERIC)),
            track=_field(obj, "track", where, int, required=False),
        )


@dataclass
class Keypoint:
    x: float
    y: float
    visible: bool = True

    def to_json(self) -> dict[str, Any]:
        return {"x": self.x, "y": self.y, "visible": bool(self.visible)}

    @classmethod
    def from_json(cls, obj: Any, where: str) -> "Keypoint":
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: keypoint must be an object")
        visible = obj.get("visible", True)
        if not isinstance(visible, bool):
            raise SchemaError(f"{where}.visible: expected boolean")
        return cls(
            x=float(_field(obj, "x", where, _NUMERIC)),
            y=float(_field(obj, "y", where, _NUMERIC)),
            visible=visible,
        )


_FRAME_KEYS = ("index", "boxes", "keypoints", "saliency_map", "fixations", "word_labels")


@dataclass
class FrameAnnotation:
    """Everything attached to one frame index of a video."""

    index: int
    boxes: list[Box] = field(default_factory=list)
    keypoints: list[Keypoint] = field(default_factory=list)
    saliency_map: str | None = None  # P5 continuous map path
    fixations: str | None = None  # P5 binary map path; value > 0 marks a fixation
    word_labels: list[tuple[int, int]] | None = None  # (word id, box index)
    extras: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"index": self.index}
        if self.boxes:
            out["boxes"] = [b.to_json() for b in self.boxes]
        if self.keypoints:
            out["keypoints"] = [k.to_json() for k in self.keypoints]
        if self.saliency_map is not None:
            out["saliency_map"] = self.saliency_map
        if self.fixations is not None:
            out["fixations"] = self.fixations
        if self.word_labels is not None:
            out["word_labels"] = [list(pair) for pair in self.word_labels]
        out.update(self.extras)
        return out

    @classmethod
    def from_json(cls, obj: Any, where: str) -> "FrameAnnotation":
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: frame annotation must be an object")
        boxes = [
            Box.from_json(b, f"{where}.boxes[{i}]")
            for i, b in enumerate(_field(obj, "boxes", where, list, required=False, default=[]))
        ]
        keypoints = [
            Keypoint.from_json(k, f"{where}.keypoints[{i}]")
            for i, k in enumerate(_field(obj, "keypoints", where, list, required=False, default=[]))
        ]
        word_labels = None
        if obj.get("word_labels") is not None:
            raw = _field(obj, "word_labels", where, list)
            word_labels = []
            for i, pair in enumerate(raw):
                if (
                    not isinstance(pair, (list, tuple))
                    or len(pair) != 2
                    or not all(isinstance(v, int) and not isinstance(v, bool) for v in pair)
                ):
                    raise SchemaError(f"{where}.word_labels[{i}]: expected [word_id, box_index]")
                word_labels.append((pair[0], pair[1]))
        return cls(
            index=_field(obj, "index", where, int),
            boxes=boxes,
            keypoints=keypoints,
            saliency_map=_field(obj, "saliency_map", where, str, required=False),
            fixations=_field(obj, "fixations", where, str, required=False),
            word_labels=word_labels,
            extras={k: v for k, v in obj.items() if k not in _FRAME_KEYS},
        )


_VIDEO_KEYS = ("path", "length", "width", "height", "split", "action_label", "frames")


@dataclass
class VideoRecord:
    """One video: a frame directory plus its ground-truth annotations."""

    path: str
    length: int
    width: int
    height: int
    split: str = "train"
    action_label: int | None = None
    frames: list[FrameAnnotation] = field(default_factory=list)
    extras: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "path": self.path,
            "length": self.length,
            "width": self.width,
            "height": self.height,
            "split": self.split,
        }
        if self.action_label is not None:
            out["action_label"] = self.action_label
        if self.frames:
            out["frames"] = [f.to_json() for f in self.frames]
        out.update(self.extras)
        return out

    @classmethod
    def from_json(cls, obj: Any, where: str) -> "VideoRecord":
        if not isinstance(obj, dict):
            raise SchemaError(f"{where}: video record must be an object")
        split = _field(obj, "split", where, str, required=False, default="train")
        if split not in SPLITS:
            raise SchemaError(f"{where}.split: {split!r} not one of {list(SPLITS)}")
        frames = [
            FrameAnnotation.from_json(f, f"{where}.frames[{i}]")
            for i, f in enumerate(_field(obj, "frames", where, list, required=False, default=[]))
        ]
        return cls(
            path=_field(obj, "path", where, str),
            length=_field(obj, "length", where, int),
            width=_field(obj, "width", where, int),
            height=_field(obj, "height", where, int),
            split=split,
            action_label=_field(obj, "action_label", where, int, required=False),
            frames=frames,
            extras={k: v for k, v in obj.items() if k not in _VIDEO_KEYS},
        )


@dataclass
class DatasetManifest:
    videos: list[VideoRecord]
    extras: dict[str, Any] = field(default_factory=dict)
    base_dir: Path | None = field(default=None, compare=False)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"videos": [v.to_json() for v in self.videos]}
        out.update(self.extras)
        return out

    def split_videos(self, split: str) -> list[tuple[int, VideoRecord]]:
        """Videos of one split, paired with their manifest index."""
        return [(i, v) for i, v in enumerate(self.videos) if v.split == split]

    def resolve(self, relpath: str) -> Path:
        """Resolve a path stored in the manifest against the manifest location."""
        p = Path(relpath)
        if p.is_absolute() or self.base_dir is None:
            return p
        return self.base_dir / p


def _field(obj: dict, key: str, where: str, kinds, required: bool = True, default: Any = None) -> Any:
    if key not in obj or obj[key] is None:
        if required:
            raise SchemaError(f"{where}.{key}: missing required field")
        return default
    val = obj[key]
    if isinstance(val, bool) and kinds in (int, _NUMERIC):
        raise SchemaError(f"{where}.{key}: expected number, got boolean")
    if not isinstance(val, kinds):
        want = kinds.__name__ if isinstance(kinds, type) else "number"
        raise SchemaError(f"{where}.{key}: expected {want}, got {type(val).__name__}")
    return val


def load_manifest(path: Path | str) -> DatasetManifest:
    """Load and materialize a manifest file; unknown keys land in extras bags.

    A bare top-level list is accepted as shorthand for ``{"videos": [...]}``;
    writes always emit the object form.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if isinstance(raw, list):
        raw = {"videos": raw}
    if not isinstance(raw, dict):
        raise SchemaError("top level must be an object with a 'videos' list")
    videos_raw = raw.get("videos")
    if not isinstance(videos_raw, list):
        raise SchemaError("videos: missing required field")
    videos = [VideoRecord.from_json(v, f"videos[{i}]") for i, v in enumerate(videos_raw)]
    extras = {k: v for k, v in raw.items() if k != "videos"}
    return DatasetManifest(videos=videos, extras=extras, base_dir=path.parent)


def save_manifest(manifest: DatasetManifest, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")
    return path


@dataclass
class Violation:
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, where: str, message: str) -> None:
        self.violations.append(Violation(where, message))

    def to_json(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "violations": [{"where": v.where, "message": v.message} for v in self.violations],
        }


def validate_manifest(
    manifest: DatasetManifest,
    check_files: bool = False,
    root: Path | str | None = None,
) -> ValidationReport:
    """Collect every constraint violation in a manifest; empty report = valid.

    Violations are data, not exceptions. With ``check_files`` set, every frame
    file implied by a video length and every referenced map file must exist
    (paths resolved against ``root``, defaulting to the manifest location).
    """
    from .frame_io import FRAME_INDEX_DIGITS  # local import keeps module deps one-way

    report = ValidationReport()
    base = Path(root) if root is not None else manifest.base_dir

    def resolve(rel: str) -> Path:
        p = Path(rel)
        return p if (p.is_absolute() or base is None) else base / p

    if not manifest.videos:
        report.add("videos", "manifest has no videos")
    seen_paths: dict[str, int] = {}
    for vi, video in enumerate(manifest.videos):
        where = f"videos[{vi}]"
        if video.path in seen_paths:
            report.add(f"{where}.path", f"duplicate video path (also videos[{seen_paths[video.path]}])")
        else:
            seen_paths[video.path] = vi
        if video.length < 1:
            report.add(f"{where}.length", "length must be >= 1")
        if video.width < 1 or video.height < 1:
            report.add(f"{where}", f"bad dimensions {video.width}x{video.height}")
        if video.split not in SPLITS:
            report.add(f"{where}.split", f"{video.split!r} not one of {list(SPLITS)}")
        if video.action_label is not None and video.action_label < 0:
            report.add(f"{where}.action_label", "negative class id")
        for fi, ann in enumerate(video.frames):
            fwhere = f"{where}.frames[{fi}]"
            if not (0 <= ann.index < video.length):
                report.add(f"{fwhere}.index", f"index out of range (index {ann.index}, length {video.length})")
            for bi, box in enumerate(ann.boxes):
                bwhere = f"{fwhere}.boxes[{bi}]"
                if box.xmin >= box.xmax or box.ymin >= box.ymax:
                    report.add(bwhere, f"degenerate box ({box.xmin},{box.ymin},{box.xmax},{box.ymax})")
                if box.xmin < 0 or box.ymin < 0 or box.xmax > video.width or box.ymax > video.height:
                    report.add(bwhere, "box outside frame")
            for ki, kp in enumerate(ann.keypoints):
                if not (0 <= kp.x <= video.width and 0 <= kp.y <= video.height):
                    report.add(f"{fwhere}.keypoints[{ki}]", "keypoint outside frame")
            if ann.word_labels:
                for wi, (_, box_index) in enumerate(ann.word_labels):
                    if not (0 <= box_index < len(ann.boxes)):
                        report.add(f"{fwhere}.word_labels[{wi}]", f"box index {box_index} out of range")
            if check_files:
                for key, rel in (("saliency_map", ann.saliency_map), ("fixations", ann.fixations)):
                    if rel is not None and not resolve(rel).is_file():
                        report.add(f"{fwhere}.{key}", f"missing map file {rel}")
        if check_files and video.length >= 1:
            frame_dir = resolve(video.path)
            if not frame_dir.is_dir():
                report.add(f"{where}.path", f"missing frame directory {video.path}")
            else:
                for idx in range(video.length):
                    stem = f"{idx:0{FRAME_INDEX_DIGITS}d}"
                    if not any((frame_dir / (stem + ext)).is_file() for ext in (".ppm", ".pgm")):
                        report.add(f"{where}.path", f"missing frame file {stem} in {video.path}")
                        break  # one message per video is enough
    return report
