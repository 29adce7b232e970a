"""Detector evaluation: greedy IoU matching, TP/GT, PR curves, AP, F-beta.

Matching convention: predictions are visited in descending score order
(ties by input index) and each claims its highest-IoU unclaimed ground
truth box when that IoU is strictly greater than the threshold. An IoU
exactly equal to the threshold counts as a false positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import Box2D, ScoredBox, iou


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (prediction idx, gt idx, iou)
    unmatched_predictions: tuple[int, ...]
    unmatched_ground_truth: tuple[int, ...]

    @property
    def n_true_positives(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class PRPoint:
    score_threshold: float
    precision: float
    recall: float


@dataclass
class EvalReport:
    tp_gt_ratio: float
    average_precision: float
    mean_jaccard: float
    pr_curve: list[PRPoint]
    n_images: int
    n_gt: int
    n_predictions: int
    iou_threshold: float = 0.5
    ap_mode: str = "pooled"

    def to_dict(self) -> dict:
        """Flat JSON-ready view (the PR curve is exported separately as CSV)."""
        return {
            "tp_gt_ratio": self.tp_gt_ratio,
            "average_precision": self.average_precision,
            "mean_jaccard": self.mean_jaccard,
            "n_images": self.n_images,
            "n_gt": self.n_gt,
            "n_predictions": self.n_predictions,
            "iou_threshold": self.iou_threshold,
            "ap_mode": self.ap_mode,
            "n_pr_points": len(self.pr_curve),
        }


def match_detections(predictions: Sequence[ScoredBox],
                     ground_truth: Sequence[Box2D],
                     iou_threshold: float = 0.5) -> MatchResult:
    """Greedily match predictions to ground truth, one GT per prediction."""
    order = sorted(range(len(predictions)), key=lambda i: (-predictions[i].score, i))
    claimed: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    unmatched_preds: list[int] = []
    for pi in order:
        best_gi = -1
        best_iou = 0.0
        for gi, gt in enumerate(ground_truth):
            if gi in claimed:
                continue
            j = iou(predictions[pi].box, gt)
            if j > best_iou:
                best_iou = j
                best_gi = gi
        if best_gi >= 0 and best_iou > iou_threshold:
            claimed.add(best_gi)
            pairs.append((pi, best_gi, best_iou))
        else:
            unmatched_preds.append(pi)
    unmatched_gt = tuple(gi for gi in range(len(ground_truth)) if gi not in claimed)
    pairs.sort()
    unmatched_preds.sort()
    return MatchResult(tuple(pairs), tuple(unmatched_preds), unmatched_gt)


def tp_gt_ratio(result: MatchResult, n_ground_truth: int) -> float:
    """True-positive count over ground-truth count."""
    n_tp = result.n_true_positives
    if n_ground_truth == 0:
        if n_tp > 0:
            raise ValueError("matched pairs present but n_ground_truth is 0")
        return 0.0
    if n_ground_truth < n_tp:
        raise ValueError(f"n_ground_truth={n_ground_truth} < matched pairs={n_tp}")
    return n_tp / n_ground_truth


def pr_curve(per_image: Sequence[tuple[Sequence[ScoredBox], Sequence[Box2D]]],
             iou_threshold: float = 0.5) -> list[PRPoint]:
    """Precision/recall at every distinct detection score, descending.

    Predictions are pooled over the dataset; at each threshold the matching
    is re-run per image with the predictions whose score is >= threshold.
    """
    total_gt = sum(len(gt) for _, gt in per_image)
    if total_gt == 0:
        raise ValueError("pr_curve requires at least one ground-truth box")
    scores = sorted({p.score for preds, _ in per_image for p in preds}, reverse=True)
    points: list[PRPoint] = []
    for threshold in scores:
        tp = 0
        n_kept = 0
        for preds, gt in per_image:
            surviving = [p for p in preds if p.score >= threshold]
            n_kept += len(surviving)
            tp += match_detections(surviving, gt, iou_threshold).n_true_positives
        precision = tp / n_kept if n_kept else 0.0
        points.append(PRPoint(threshold, precision, tp / total_gt))
    return points


def average_precision(curve: Sequence[PRPoint]) -> float:
    """Area under the PR curve with the all-points precision envelope.

    The envelope at recall r is the maximum precision among points whose
    recall is >= r, so the interpolated precision is non-increasing in
    recall; the integral runs from recall 0 to the highest achieved recall.
    """
    if not curve:
        raise ValueError("average_precision requires a non-empty curve")
    recalls = sorted({p.recall for p in curve})
    ap = 0.0
    prev_r = 0.0
    for r in recalls:
        envelope = max(p.precision for p in curve if p.recall >= r)
        ap += (r - prev_r) * envelope
        prev_r = r
    return ap


def mean_jaccard(results: Sequence[MatchResult]) -> float:
    """Mean IoU over all matched pairs; 0.0 when nothing matched."""
    ious = [j for r in results for (_, _, j) in r.pairs]
    if not ious:
        return 0.0
    return sum(ious) / len(ious)


def f_beta(precision: float, recall: float, beta: float) -> float:
    """F-beta score; beta < 1 weights precision above recall."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise ValueError("precision and recall must be in [0, 1]")
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * precision * recall / (b2 * precision + recall)


def evaluate_dataset(per_image: Sequence[tuple[Sequence[ScoredBox], Sequence[Box2D]]],
                     iou_threshold: float = 0.5,
                     ap_mode: str = "pooled") -> EvalReport:
    """Aggregate matching, TP/GT, mean Jaccard, PR curve and AP over a dataset.

    ap_mode "pooled" sweeps thresholds over the pooled predictions;
    "per-image-mean" averages single-image APs (images without ground truth
    are skipped, images with ground truth but no predictions count as 0).
    """
    if ap_mode not in ("pooled", "per-image-mean"):
        raise ValueError(f"unknown ap_mode {ap_mode!r}")
    results = [match_detections(preds, gt, iou_threshold) for preds, gt in per_image]
    n_gt = sum(len(gt) for _, gt in per_image)
    n_pred = sum(len(preds) for preds, _ in per_image)
    n_tp = sum(r.n_true_positives for r in results)

    curve: list[PRPoint] = []
    if n_gt > 0 and n_pred > 0:
        curve = pr_curve(per_image, iou_threshold)

    if ap_mode == "pooled":
        ap = average_precision(curve) if curve else 0.0
    else:
        per_image_aps = []
        for preds, gt in per_image:
            if not gt:
                continue
            if not preds:
                per_image_aps.append(0.0)
                continue
            per_image_aps.append(average_precision(pr_curve([(preds, gt)], iou_threshold)))
        ap = sum(per_image_aps) / len(per_image_aps) if per_image_aps else 0.0

    ratio = n_tp / n_gt if n_gt else 0.0
    return EvalReport(
        tp_gt_ratio=ratio,
        average_precision=ap,
        mean_jaccard=mean_jaccard(results),
        pr_curve=curve,
        n_images=len(per_image),
        n_gt=n_gt,
        n_predictions=n_pred,
        iou_threshold=iou_threshold,
        ap_mode=ap_mode,
    )
