"""
Pixel-level segmentation metrics for plume masks (plume is the positive class).
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from plumerise.errors import DimensionMismatch
from plumerise.mask_analysis import PlumeMask

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["image_id", "tp", "fp", "fn", "tn", "accuracy", "recall", "precision", "f1"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class Scores:
    """None marks a 0/0 metric."""

    accuracy: Optional[float]
    recall: Optional[float]
    precision: Optional[float]
    f1: Optional[float]


def _ratio(num: float, den: float) -> Optional[float]:
    return None if den == 0 else num / den


def confusion(pred: PlumeMask, gt: PlumeMask) -> ConfusionMatrix:
    """
    Count agreement between a predicted and a ground-truth mask.

    Args:
        pred: Predicted mask
        gt: Ground-truth mask

    Returns:
        ConfusionMatrix: Pixel counts
    """
    if pred.pixels.shape != gt.pixels.shape:
        raise DimensionMismatch(f"prediction is {pred.pixels.shape}, ground truth is {gt.pixels.shape}")
    p = pred.pixels
    g = gt.pixels
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(p.size - tp - fp - fn)
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def f1_score(recall: Optional[float], precision: Optional[float]) -> Optional[float]:
    if recall is None or precision is None:
        return None
    return _ratio(2.0 * recall * precision, recall + precision)


def scores(cm: ConfusionMatrix) -> Scores:
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    return Scores(
        accuracy=_ratio(cm.tp + cm.tn, cm.total),
        recall=recall,
        precision=precision,
        f1=f1_score(recall, precision),
    )


def _mean_defined(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def aggregate(per_image: Sequence[Tuple[str, ConfusionMatrix]]) -> Dict[str, Scores]:
    """
    Batch scores in both averaging modes.

    Returns:
        dict: "macro" (mean of per-image scores, undefined values excluded)
            and "micro" (scores of the pooled confusion matrix)
    """
    per_scores = [scores(cm) for _, cm in per_image]
    pooled = ConfusionMatrix(0, 0, 0, 0)
    for _, cm in per_image:
        pooled = pooled + cm
    macro = Scores(
        accuracy=_mean_defined([s.accuracy for s in per_scores]),
        recall=_mean_defined([s.recall for s in per_scores]),
        precision=_mean_defined([s.precision for s in per_scores]),
        f1=_mean_defined([s.f1 for s in per_scores]),
    )
    return {"macro": macro, "micro": scores(pooled)}


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def report_rows(per_image: Sequence[Tuple[str, ConfusionMatrix]]) -> List[List[str]]:
    """CSV rows for each image followed by `__macro__` and `__micro__` summaries."""
    rows = []
    for image_id, cm in per_image:
        s = scores(cm)
        rows.append([image_id, str(cm.tp), str(cm.fp), str(cm.fn), str(cm.tn),
                     _fmt(s.accuracy), _fmt(s.recall), _fmt(s.precision), _fmt(s.f1)])
    pooled = ConfusionMatrix(0, 0, 0, 0)
    for _, cm in per_image:
        pooled = pooled + cm
    summary = aggregate(per_image)
    for name in ("macro", "micro"):
        s = summary[name]
        counts = [str(pooled.tp), str(pooled.fp), str(pooled.fn), str(pooled.tn)] if name == "micro" else ["", "", "", ""]
        rows.append([f"__{name}__", *counts, _fmt(s.accuracy), _fmt(s.recall), _fmt(s.precision), _fmt(s.f1)])
    return rows
