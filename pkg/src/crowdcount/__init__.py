"""Face-detector evaluation and unique-people counting over video frames."""

from .geometry import Box2D, ScoredBox, iou, nms, rescale_box
from .metrics import (
    EvalReport,
    MatchResult,
    PRPoint,
    average_precision,
    evaluate_dataset,
    f_beta,
    match_detections,
    mean_jaccard,
    pr_curve,
    tp_gt_ratio,
)

__version__ = "0.1.0"

__all__ = [
    "Box2D", "ScoredBox", "iou", "nms", "rescale_box",
    "EvalReport", "MatchResult", "PRPoint", "average_precision",
    "evaluate_dataset", "f_beta", "match_detections", "mean_jaccard",
    "pr_curve", "tp_gt_ratio",
    "__version__",
]
