"""Panoptic quality family, mIoU, and the local loss evaluators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import IGNORE, ClassTable, PanopticLabels, PointCloud
from .cutpursuit import LOG_CLAMP
from .errors import DataError, ParameterError


@dataclass
class ClassStats:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    iou_sum: float = 0.0

    @property
    def denominator(self) -> float:
        return self.tp + 0.5 * self.fp + 0.5 * self.fn

    @property
    def pq(self) -> float:
        d = self.denominator
        return 100.0 * self.iou_sum / d if d > 0 else 0.0

    @property
    def rq(self) -> float:
        d = self.denominator
        return 100.0 * self.tp / d if d > 0 else 0.0

    @property
    def sq(self) -> float:
        return 100.0 * self.iou_sum / self.tp if self.tp > 0 else 0.0

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return 100.0 * self.tp / d if d > 0 else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return 100.0 * self.tp / d if d > 0 else 0.0


@dataclass
class PanopticMetrics:
    """Per-class and averaged PQ/RQ/SQ with the underlying match counts."""

    per_class: dict = field(default_factory=dict)
    present_classes: tuple = ()
    miou: float = 0.0

    def _mean(self, attr) -> float:
        vals = [getattr(self.per_class[c], attr) for c in self.present_classes]
        return float(np.mean(vals)) if vals else 0.0

    @property
    def pq(self) -> float:
        return self._mean("pq")

    @property
    def rq(self) -> float:
        return self._mean("rq")

    @property
    def sq(self) -> float:
        return self._mean("sq")

    def to_dict(self, table: ClassTable) -> dict:
        per = {}
        for c in sorted(self.per_class):
            s = self.per_class[c]
            per[table.names[c]] = {
                "pq": s.pq, "rq": s.rq, "sq": s.sq,
                "tp": s.tp, "fp": s.fp, "fn": s.fn,
                "precision": s.precision, "recall": s.recall,
            }
        return {"pq": self.pq, "rq": self.rq, "sq": self.sq,
                "miou": self.miou, "per_class": per}


def _segments(class_id, object_id):
    """Group points into (class, object) segments: {(cls, obj): point count},
    plus per-point segment keys for intersection counting."""
    key = class_id * (2**32) + object_id
    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    return uniq, inverse, counts


def panoptic_quality(pred: PanopticLabels, gt: PointCloud,
                     table: ClassTable) -> PanopticMetrics:
    """PQ/RQ/SQ under the standard unique IoU > 0.5 matching.

    Ground-truth IGNORE points are removed from both sides first; predicted
    segments that vanish entirely are dropped.  Classes absent from the
    ground truth are excluded from the averages.
    """
    if gt.semantic is None or gt.object is None:
        raise DataError("ground truth must be labeled")
    if len(pred) != len(gt):
        raise DataError("prediction and ground truth lengths differ")
    valid = (gt.semantic != IGNORE) & (gt.object != IGNORE)
    gc, go = gt.semantic[valid], gt.object[valid]
    pc, po = pred.class_id[valid], pred.object_id[valid]

    g_keys, g_inv, g_counts = _segments(gc, go)
    p_keys, p_inv, p_counts = _segments(pc, po)
    # Intersections via joint keys.
    joint = g_inv.astype(np.int64) * len(p_keys) + p_inv
    pairs, inter = np.unique(joint, return_counts=True)
    gi = pairs // len(p_keys)
    pi = pairs % len(p_keys)

    g_class = (g_keys // 2**32).astype(np.int64)
    p_class = (p_keys // 2**32).astype(np.int64)

    stats: dict[int, ClassStats] = {}

    def stat(c):
        return stats.setdefault(int(c), ClassStats())

    matched_gt = np.zeros(len(g_keys), dtype=bool)
    matched_pred = np.zeros(len(p_keys), dtype=bool)
    same_class = g_class[gi] == p_class[pi]
    union = g_counts[gi] + p_counts[pi] - inter
    iou = inter / union
    for j in np.nonzero(same_class & (iou > 0.5))[0]:
        # IoU > 0.5 makes the match unique per segment on both sides.
        assert not matched_gt[gi[j]] and not matched_pred[pi[j]], \
            "non-unique match at IoU > 0.5"
        matched_gt[gi[j]] = True
        matched_pred[pi[j]] = True
        s = stat(g_class[gi[j]])
        s.tp += 1
        s.iou_sum += float(iou[j])
    for i in np.nonzero(~matched_gt)[0]:
        stat(g_class[i]).fn += 1
    for i in np.nonzero(~matched_pred)[0]:
        stat(p_class[i]).fp += 1

    present = tuple(sorted(set(int(c) for c in g_class)))
    m = PanopticMetrics(per_class=stats, present_classes=present)
    m.miou = miou(pred.class_id, gt.semantic, table,
                  gt_ignore=~np.asarray(valid))
    return m


def miou(pred_classes, gt_classes, table: ClassTable, gt_ignore=None) -> float:
    """Mean per-class IoU of semantic labels over gt-present classes, in [0, 100]."""
    pred = np.asarray(pred_classes, dtype=np.int64)
    gt = np.asarray(gt_classes, dtype=np.int64)
    if len(pred) != len(gt):
        raise DataError("prediction and ground truth lengths differ")
    keep = gt != IGNORE
    if gt_ignore is not None:
        keep &= ~np.asarray(gt_ignore, dtype=bool)
    pred, gt = pred[keep], gt[keep]
    ious = []
    for c in np.unique(gt):
        inter = np.count_nonzero((gt == c) & (pred == c))
        un = np.count_nonzero((gt == c) | (pred == c))
        ious.append(inter / un if un else 0.0)
    return 100.0 * float(np.mean(ious)) if ious else 0.0


def class_loss(pred_distribution, true_class: int) -> float:
    """Cross-entropy of a predicted class distribution against the true class."""
    p = np.asarray(pred_distribution, dtype=np.float64)
    return float(-np.log(max(float(p[int(true_class)]), LOG_CLAMP)))


def agreement_loss(pred_a: float, true_a: float) -> float:
    """Cross-entropy between Bernoulli(true) and Bernoulli(pred) agreements."""
    a = min(max(float(pred_a), LOG_CLAMP), 1.0 - LOG_CLAMP)
    t = float(true_a)
    return float(-(t * np.log(a) + (1.0 - t) * np.log(1.0 - a)))


def combined_loss(class_losses, agreement_losses) -> float:
    """Mean class loss plus mean agreement loss (IGNORE terms pre-excluded)."""
    cl = np.asarray(class_losses, dtype=np.float64)
    al = np.asarray(agreement_losses, dtype=np.float64)
    cl = cl[np.isfinite(cl)]
    al = al[np.isfinite(al)]
    if len(cl) == 0 or len(al) == 0:
        raise ParameterError("combined loss needs at least one valid term per part")
    return float(cl.mean() + al.mean())


def precision_recall(pred: PanopticLabels, gt: PointCloud,
                     table: ClassTable) -> dict:
    """Per-class precision/recall under the PQ matching."""
    m = panoptic_quality(pred, gt, table)
    return {c: (s.precision, s.recall) for c, s in m.per_class.items()
            if s.tp + s.fp + s.fn > 0}
