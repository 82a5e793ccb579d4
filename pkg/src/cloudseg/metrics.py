"""Scene-pooled segmentation metrics and cross-validation folds.

Metrics are computed from confusion counts summed over all scenes before
dividing, so a large scene weighs more than a small one. When a ratio has a
zero denominator its numerator is zero too, and the ratio is defined as 1.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int
    scene_id: str = ""

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.tn + other.tn,
                         self.fp + other.fp, self.fn + other.fn)


@dataclass
class MetricReport:
    jaccard: float
    precision: float
    recall: float
    accuracy: float
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    average_jaccard: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if not self.per_class:
            d.pop("per_class")
        if self.average_jaccard is None:
            d.pop("average_jaccard")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        rows = [("class", "jaccard", "precision", "recall", "accuracy")]
        for name, m in self.per_class.items():
            rows.append((name, *(f"{100 * m[k]:.2f}" for k in rows[0][1:])))
        rows.append(("overall", *(f"{100 * getattr(self, k):.2f}" for k in rows[0][1:])))
        if self.average_jaccard is not None:
            rows.append(("avg jaccard", f"{100 * self.average_jaccard:.2f}", "", "", ""))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows) + "\n"


def confusion(gt, pred, scene_id: str = "") -> Confusion:
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    if gt.shape != pred.shape:
        raise ValueError(f"shape mismatch: {gt.shape} vs {pred.shape}")
    tp = int(np.count_nonzero(gt & pred))
    fp = int(np.count_nonzero(~gt & pred))
    fn = int(np.count_nonzero(gt & ~pred))
    return Confusion(tp, gt.size - tp - fp - fn, fp, fn, scene_id)


def _ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def _scores(c: Confusion) -> dict[str, float]:
    return {
        "jaccard": _ratio(c.tp, c.tp + c.fp + c.fn),
        "precision": _ratio(c.tp, c.tp + c.fp),
        "recall": _ratio(c.tp, c.tp + c.fn),
        "accuracy": _ratio(c.tp + c.tn, c.total),
    }


def pool(confusions) -> Confusion:
    confusions = list(confusions)
    if not confusions:
        raise ValueError("need at least one scene")
    total = Confusion(0, 0, 0, 0)
    for c in confusions:
        total = total + c
    return total


def aggregate(confusions) -> MetricReport:
    return MetricReport(**_scores(pool(confusions)))


def multiclass_confusion(gt_labels, pred_labels, n_classes: int) -> np.ndarray:
    """``(K, K)`` count matrix indexed ``[gt, pred]``; pixels labelled -1 are skipped."""
    gt = np.asarray(gt_labels).ravel()
    pred = np.asarray(pred_labels).ravel()
    if gt.shape != pred.shape:
        raise ValueError("shape mismatch")
    keep = gt >= 0
    return np.bincount(gt[keep] * n_classes + pred[keep], minlength=n_classes**2).reshape(n_classes, n_classes)


def multiclass_report(matrices, class_names=None) -> MetricReport:
    """Per-class one-vs-rest metrics from pooled ``(K, K)`` confusion matrices.

    ``jaccard``/``precision``/``recall`` of the report are unweighted class means;
    ``accuracy`` is the overall pixel accuracy.
    """
    total = np.sum([np.asarray(m, dtype=np.int64) for m in matrices], axis=0)
    k = total.shape[0]
    names = list(class_names) if class_names is not None else [str(i) for i in range(k)]
    per_class = {}
    n = int(total.sum())
    for i, name in enumerate(names):
        tp = int(total[i, i])
        fp = int(total[:, i].sum()) - tp
        fn = int(total[i, :].sum()) - tp
        per_class[name] = _scores(Confusion(tp, n - tp - fp - fn, fp, fn))
    mean = {key: float(np.mean([m[key] for m in per_class.values()])) for key in ("jaccard", "precision", "recall")}
    return MetricReport(
        jaccard=mean["jaccard"], precision=mean["precision"], recall=mean["recall"],
        accuracy=_ratio(int(np.trace(total)), n),
        per_class=per_class, average_jaccard=mean["jaccard"],
    )


def make_folds(items, k: int, seed: int) -> list[list]:
    """Shuffle ``items`` with ``seed`` and split into ``k`` folds whose sizes differ by at most one."""
    items = list(items)
    if not 1 <= k <= max(len(items), 1):
        raise ValueError(f"cannot split {len(items)} items into {k} folds")
    order = np.random.default_rng(seed).permutation(len(items))
    return [[items[i] for i in part] for part in np.array_split(order, k)]
