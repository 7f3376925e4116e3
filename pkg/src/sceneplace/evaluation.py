"""Scoring predicted boxes against ground-truth annotations.

Predictions are matched one-to-one to ground truth greedily by descending
volume IoU within each category (a Hungarian assignment is unnecessary at
scene scale; the report records the matcher). IoU is the rotated-footprint
intersection area times the z overlap, over the union volume. A match
counts as detected at an IoU threshold, and as a true positive when its
orientation error is at most 20 degrees. Orientation error compares front
headings when both boxes carry one, otherwise yaw modulo 180 degrees.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass

from shapely.geometry import Polygon

from .abstraction import AbstractedInstance
from .errors import SchemaError

TP_MAX_ORIENTATION_ERROR_DEG = 20.0
DEFAULT_IOU_THRESHOLDS = (0.25, 0.5)
MATCHER = "greedy-iou"


@dataclass(frozen=True)
class ObbAnnotation:
    """One upright annotated box, with a front sign where defined."""

    instance_id: int
    category: str
    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    yaw: float
    front: tuple[float, float] | None = None


@dataclass(frozen=True)
class ObbAnnotationSet:
    instances: tuple[ObbAnnotation, ...]

    def __post_init__(self):
        seen = set()
        for ann in self.instances:
            if ann.instance_id in seen:
                raise SchemaError(f"duplicate annotation id {ann.instance_id}")
            seen.add(ann.instance_id)
            if min(ann.extents) <= 0:
                raise SchemaError(f"annotation {ann.instance_id}: extents must be positive")


def annotation_from_instance(instance: AbstractedInstance) -> ObbAnnotation:
    obb = instance.obb
    return ObbAnnotation(
        instance_id=instance.instance_id,
        category=instance.category,
        center=(float(obb.center[0]), float(obb.center[1]), float(obb.center[2])),
        extents=(float(obb.extents[0]), float(obb.extents[1]), float(obb.extents[2])),
        yaw=float(obb.yaw),
        front=obb.front,
    )


def dump_annotations(annotations: ObbAnnotationSet) -> str:
    doc = {
        "instances": [
            {
                "instance_id": ann.instance_id,
                "category": ann.category,
                "obb": {
                    "center": [float(x) for x in ann.center],
                    "extents": [float(x) for x in ann.extents],
                    "yaw": float(ann.yaw),
                    "front": None if ann.front is None else [float(x) for x in ann.front],
                },
            }
            for ann in sorted(annotations.instances, key=lambda a: a.instance_id)
        ]
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_annotations(text: str) -> ObbAnnotationSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("instances"), list):
        raise SchemaError("expected an object with an 'instances' list")
    annotations = []
    for entry in doc["instances"]:
        try:
            obb = entry["obb"]
            front = obb.get("front")
            annotations.append(
                ObbAnnotation(
                    instance_id=int(entry["instance_id"]),
                    category=entry["category"],
                    center=tuple(float(x) for x in obb["center"]),
                    extents=tuple(float(x) for x in obb["extents"]),
                    yaw=float(obb["yaw"]),
                    front=None if front is None else (float(front[0]), float(front[1])),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad annotation entry: {exc}") from exc
    return ObbAnnotationSet(instances=tuple(annotations))


def footprint_polygon(ann: ObbAnnotation) -> Polygon:
    c, s = math.cos(ann.yaw), math.sin(ann.yaw)
    hx, hy = ann.extents[0] / 2.0, ann.extents[1] / 2.0
    corners = []
    for lx, ly in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
        corners.append((ann.center[0] + lx * c - ly * s, ann.center[1] + lx * s + ly * c))
    return Polygon(corners)


def box_iou(a: ObbAnnotation, b: ObbAnnotation) -> float:
    """Volume IoU of two upright boxes (footprint intersection x z overlap)."""
    z_overlap = min(
        a.center[2] + a.extents[2] / 2.0, b.center[2] + b.extents[2] / 2.0
    ) - max(a.center[2] - a.extents[2] / 2.0, b.center[2] - b.extents[2] / 2.0)
    if z_overlap <= 0:
        return 0.0
    inter_area = footprint_polygon(a).intersection(footprint_polygon(b)).area
    if inter_area <= 0:
        return 0.0
    inter = inter_area * z_overlap
    vol_a = a.extents[0] * a.extents[1] * a.extents[2]
    vol_b = b.extents[0] * b.extents[1] * b.extents[2]
    return inter / (vol_a + vol_b - inter)


def orientation_error_deg(pred: ObbAnnotation, truth: ObbAnnotation) -> float:
    """Front-heading error in degrees; yaw modulo 180 when a front is missing."""
    if pred.front is not None and truth.front is not None:
        pa = math.degrees(math.atan2(pred.front[1], pred.front[0]))
        ta = math.degrees(math.atan2(truth.front[1], truth.front[0]))
        diff = abs(pa - ta) % 360.0
        return min(diff, 360.0 - diff)
    diff = abs(math.degrees(pred.yaw) - math.degrees(truth.yaw)) % 180.0
    return min(diff, 180.0 - diff)


@dataclass(frozen=True)
class ThresholdMetrics:
    iou_threshold: float
    median_orientation_error_deg: float | None
    tp_iou_pct: float
    precision_pct: float
    recall_pct: float
    true_positives: int
    detected: int
    n_predictions: int
    n_truth: int


@dataclass(frozen=True)
class EvalReport:
    matcher: str
    per_category: dict[str, tuple[ThresholdMetrics, ...]]
    overall: tuple[ThresholdMetrics, ...]

    def to_dict(self) -> dict:
        def metrics_dict(m: ThresholdMetrics) -> dict:
            return {
                "iou_threshold": m.iou_threshold,
                "median_orientation_error_deg": m.median_orientation_error_deg,
                "tp_iou_pct": m.tp_iou_pct,
                "precision_pct": m.precision_pct,
                "recall_pct": m.recall_pct,
                "true_positives": m.true_positives,
                "detected": m.detected,
                "n_predictions": m.n_predictions,
                "n_truth": m.n_truth,
            }

        return {
            "matcher": self.matcher,
            "per_category": {
                category: [metrics_dict(m) for m in metrics]
                for category, metrics in sorted(self.per_category.items())
            },
            "overall": [metrics_dict(m) for m in self.overall],
        }

    def render_text(self) -> str:
        lines = [f"matcher: {self.matcher}"]
        header = (
            f"{'category':<14}{'IoU th.':>8}{'med.err[deg]':>14}{'TP IoU[%]':>11}"
            f"{'prec[%]':>9}{'rec[%]':>8}{'TP':>5}{'#pred':>7}{'#truth':>8}"
        )
        lines.append(header)
        rows = list(sorted(self.per_category.items())) + [("overall", self.overall)]
        for category, metrics in rows:
            for m in metrics:
                err = "-" if m.median_orientation_error_deg is None else f"{m.median_orientation_error_deg:.2f}"
                lines.append(
                    f"{category:<14}{m.iou_threshold:>8.2f}{err:>14}{m.tp_iou_pct:>11.2f}"
                    f"{m.precision_pct:>9.2f}{m.recall_pct:>8.2f}{m.true_positives:>5d}"
                    f"{m.n_predictions:>7d}{m.n_truth:>8d}"
                )
        return "\n".join(lines) + "\n"


def _safe_pct(numerator: float, denominator: float) -> float:
    return 100.0 * numerator / denominator if denominator > 0 else 0.0


def _greedy_match(
    preds: list[ObbAnnotation], truths: list[ObbAnnotation]
) -> list[tuple[int, int, float]]:
    """One-to-one (pred, truth, iou) matches, best overlap first."""
    pairs = []
    for i, pred in enumerate(preds):
        for j, truth in enumerate(truths):
            iou = box_iou(pred, truth)
            if iou > 0:
                pairs.append((i, j, iou))
    pairs.sort(key=lambda item: (-item[2], item[0], item[1]))
    matched = []
    used_pred: set[int] = set()
    used_truth: set[int] = set()
    for i, j, iou in pairs:
        if i in used_pred or j in used_truth:
            continue
        used_pred.add(i)
        used_truth.add(j)
        matched.append((i, j, iou))
    return matched


def evaluate_annotations(
    predicted: ObbAnnotationSet,
    truth: ObbAnnotationSet,
    iou_thresholds=DEFAULT_IOU_THRESHOLDS,
) -> EvalReport:
    """Category-wise detection metrics at each IoU threshold.

    The overall row macro-averages precision/recall/TP-IoU over categories
    and pools detections for the overall median orientation error.
    Empty prediction or truth sides degrade to zero rates, never to a
    division error.
    """
    categories = sorted(
        {a.category for a in predicted.instances} | {a.category for a in truth.instances}
    )
    per_category: dict[str, tuple[ThresholdMetrics, ...]] = {}
    pooled: dict[float, list[tuple[float, float]]] = {th: [] for th in iou_thresholds}

    for category in categories:
        preds = [a for a in predicted.instances if a.category == category]
        truths = [a for a in truth.instances if a.category == category]
        matched = _greedy_match(preds, truths)
        metrics = []
        for th in iou_thresholds:
            detected = [
                (iou, orientation_error_deg(preds[i], truths[j]))
                for i, j, iou in matched
                if iou >= th
            ]
            pooled[th].extend(detected)
            tps = [
                (iou, err) for iou, err in detected if err <= TP_MAX_ORIENTATION_ERROR_DEG
            ]
            metrics.append(
                ThresholdMetrics(
                    iou_threshold=th,
                    median_orientation_error_deg=(
                        statistics.median(err for _, err in detected) if detected else None
                    ),
                    tp_iou_pct=(
                        100.0 * statistics.fmean(iou for iou, _ in tps) if tps else 0.0
                    ),
                    precision_pct=_safe_pct(len(tps), len(preds)),
                    recall_pct=_safe_pct(len(tps), len(truths)),
                    true_positives=len(tps),
                    detected=len(detected),
                    n_predictions=len(preds),
                    n_truth=len(truths),
                )
            )
        per_category[category] = tuple(metrics)

    overall = []
    for idx, th in enumerate(iou_thresholds):
        rows = [per_category[c][idx] for c in categories]
        detected = pooled[th]
        tps = [(iou, err) for iou, err in detected if err <= TP_MAX_ORIENTATION_ERROR_DEG]
        overall.append(
            ThresholdMetrics(
                iou_threshold=th,
                median_orientation_error_deg=(
                    statistics.median(err for _, err in detected) if detected else None
                ),
                tp_iou_pct=statistics.fmean(r.tp_iou_pct for r in rows) if rows else 0.0,
                precision_pct=statistics.fmean(r.precision_pct for r in rows) if rows else 0.0,
                recall_pct=statistics.fmean(r.recall_pct for r in rows) if rows else 0.0,
                true_positives=len(tps),
                detected=len(detected),
                n_predictions=len(predicted.instances),
                n_truth=len(truth.instances),
            )
        )
    return EvalReport(matcher=MATCHER, per_category=per_category, overall=tuple(overall))


def eval_obbs(
    predicted: list[AbstractedInstance],
    truth: ObbAnnotationSet,
    iou_thresholds=DEFAULT_IOU_THRESHOLDS,
) -> EvalReport:
    """Score abstracted instances against ground-truth annotations."""
    predictions = ObbAnnotationSet(
        instances=tuple(annotation_from_instance(inst) for inst in predicted)
    )
    return evaluate_annotations(predictions, truth, iou_thresholds)
