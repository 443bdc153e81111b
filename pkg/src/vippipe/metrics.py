"""Evaluation metrics: accuracy, IoU, VOC-style AP/mAP, NSS, and CC.

Conventions pinned for reproducibility:

* AP sorts detections by descending confidence with ties broken by input
  order, matches greedily to the unmatched ground-truth box of highest IoU
  at or above the threshold (equal IoU goes to the lower box index), and
  interpolates eleven-point (recall knots 0.0, 0.1, ..., 1.0) by default;
  ``all_point`` integrates the precision envelope instead.
* NSS z-scores the predicted map with the sample (N-1) standard deviation
  and averages at fixated pixels (fixation value > 0).
* CC is the plain Pearson correlation over all pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateMap,
    EmptyInput,
    NoFixations,
    NoGroundTruth,
    ShapeMismatch,
)
from .manifest import Box

ELEVEN_POINT = "eleven_point"
ALL_POINT = "all_point"
RECALL_KNOTS = tuple(k / 10.0 for k in range(11))

METRIC_NAMES = ("accuracy", "iou", "ap", "map", "nss", "cc")


@dataclass(frozen=True)
class Detection:
    image_id: Hashable
    label: int
    box: Box
    confidence: float


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of positions where prediction equals label."""
    if len(predictions) != len(labels):
        raise ShapeMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not predictions:
        raise EmptyInput("accuracy of an empty sequence is undefined")
    hits = sum(1 for p, l in zip(predictions, labels) if p == l)
    return hits / len(predictions)


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; disjoint boxes score 0."""
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0.0 else 0.0


def _pr_curve(
    detections: Sequence[Detection],
    ground_truth: Mapping[Any, Sequence[Box]],
    class_id: int,
    iou_threshold: float,
) -> tuple[list[float], list[float]]:
    """Precision/recall after each detection of one class, in confidence order."""
    gt_boxes = {
        img: [b for b in boxes if b.label == class_id] for img, boxes in ground_truth.items()
    }
    n_gt = sum(len(v) for v in gt_boxes.values())
    if n_gt == 0:
        raise NoGroundTruth(f"no ground-truth box carries class {class_id}")

    class_dets = [d for d in detections if d.label == class_id]
    # sorted() is stable: equal confidences keep their input order.
    class_dets = sorted(class_dets, key=lambda d: -d.confidence)

    matched: dict[Any, list[bool]] = {img: [False] * len(v) for img, v in gt_boxes.items()}
    precisions: list[float] = []
    recalls: list[float] = []
    tp = 0
    for k, det in enumerate(class_dets, start=1):
        candidates = gt_boxes.get(det.image_id, [])
        best_index = -1
        best_iou = 0.0
        for gi, gt in enumerate(candidates):
            if matched[det.image_id][gi]:
                continue
            value = iou(det.box, gt)
            if value >= iou_threshold and value > best_iou:
                best_iou = value
                best_index = gi
        if best_index >= 0:
            matched[det.image_id][best_index] = True
            tp += 1
        precisions.append(tp / k)
        recalls.append(tp / n_gt)
    return precisions, recalls


def average_precision(
    detections: Sequence[Detection],
    ground_truth: Mapping[Any, Sequence[Box]],
    class_id: int,
    iou_threshold: float = 0.5,
    interpolation: str = ELEVEN_POINT,
) -> float:
    """Area under the interpolated precision/recall curve for one class."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    precisions, recalls = _pr_curve(detections, ground_truth, class_id, iou_threshold)
    if interpolation == ELEVEN_POINT:
        total = 0.0
        for knot in RECALL_KNOTS:
            best = max((p for p, r in zip(precisions, recalls) if r >= knot), default=0.0)
            total += best
        return total / len(RECALL_KNOTS)
    if interpolation == ALL_POINT:
        mrec = [0.0, *recalls, 1.0]
        mpre = [0.0, *precisions, 0.0]
        for i in range(len(mpre) - 2, -1, -1):
            mpre[i] = max(mpre[i], mpre[i + 1])
        area = 0.0
        for i in range(1, len(mrec)):
            if mrec[i] != mrec[i - 1]:
                area += (mrec[i] - mrec[i - 1]) * mpre[i]
        return area
    raise ValueError(f"interpolation must be {ELEVEN_POINT} or {ALL_POINT}, got {interpolation!r}")


def mean_ap(
    detections: Sequence[Detection],
    ground_truth: Mapping[Any, Sequence[Box]],
    classes: Iterable[int] | None = None,
    iou_threshold: float = 0.5,
    interpolation: str = ELEVEN_POINT,
) -> float:
    """Unweighted mean of per-class AP over classes that have ground truth."""
    if classes is None:
        classes = sorted({b.label for boxes in ground_truth.values() for b in boxes})
    with_gt = [
        c
        for c in classes
        if any(b.label == c for boxes in ground_truth.values() for b in boxes)
    ]
    if not with_gt:
        raise NoGroundTruth("no requested class has ground truth")
    values = [
        average_precision(detections, ground_truth, c, iou_threshold, interpolation)
        for c in with_gt
    ]
    return float(np.mean(values))


def _as_map(arr: Any) -> np.ndarray:
    data = np.asarray(arr, dtype=np.float64)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D map, got shape {data.shape}")
    return data


def nss(predicted: Any, fixations: Any) -> float:
    """Mean z-scored predicted saliency at fixated pixels (sample std, N-1)."""
    pred = _as_map(predicted)
    fix = _as_map(fixations)
    if pred.shape != fix.shape:
        raise ShapeMismatch(f"predicted {pred.shape} vs fixations {fix.shape}")
    mask = fix > 0
    if not mask.any():
        raise NoFixations("fixation map marks no pixel")
    if pred.size < 2:
        raise DegenerateMap("map too small to normalize")
    std = pred.std(ddof=1)
    if std == 0.0:
        raise DegenerateMap("predicted map is constant")
    z = (pred - pred.mean()) / std
    return float(z[mask].mean())


def cc(predicted: Any, gt: Any) -> float:
    """Pearson linear correlation between two continuous maps, over all pixels."""
    a = _as_map(predicted).ravel()
    b = _as_map(gt).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"predicted {a.shape} vs ground truth {b.shape}")
    da = a - a.mean()
    db = b - b.mean()
    na = np.sqrt((da * da).sum())
    nb = np.sqrt((db * db).sum())
    if na == 0.0 or nb == 0.0:
        raise DegenerateMap("correlation with a constant map is undefined")
    return float((da * db).sum() / (na * nb))
