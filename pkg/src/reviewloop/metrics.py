"""Multi-label binarization and micro-averaged precision/recall/F1.

Counts are summed over all classes and samples, so the scores follow the
usual micro-averaging definition. Zero-denominator conventions: precision
(or recall) is 1 when its denominator is 0, and F1 is 0 when P + R is 0,
which leaves a perfect empty prediction set unpenalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .seqmodel import LabelVector, PredictionVector

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ConfusionTotals:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionTotals") -> "ConfusionTotals":
        return ConfusionTotals(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn)


@dataclass(frozen=True)
class EvalReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    totals: ConfusionTotals
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "tp": self.totals.tp,
            "fp": self.totals.fp,
            "fn": self.totals.fn,
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            micro_precision=d["micro_precision"],
            micro_recall=d["micro_recall"],
            micro_f1=d["micro_f1"],
            totals=ConfusionTotals(tp=d["tp"], fp=d["fp"], fn=d["fn"]),
            n_samples=d["n_samples"],
        )


def binarize(pred: PredictionVector, threshold: float = DEFAULT_THRESHOLD,
             force_top1: bool = False, taxonomy: tuple[str, ...] | None = None) -> LabelVector:
    """Set class i iff its probability reaches the threshold.

    With force_top1, an otherwise empty result gets the argmax class (lowest
    index wins ties). The taxonomy defaults to positional class names.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    values = (pred.values >= threshold).astype(np.float64)
    if force_top1 and values.sum() == 0:
        values[int(np.argmax(pred.values))] = 1.0
    if taxonomy is None:
        taxonomy = tuple(f"class_{i}" for i in range(pred.values.shape[0]))
    return LabelVector(values=values, taxonomy=taxonomy)


def accumulate(preds: list[LabelVector], golds: list[LabelVector]) -> ConfusionTotals:
    """TP/FP/FN totals over all samples and classes."""
    if len(preds) != len(golds):
        raise ShapeError(f"{len(preds)} predictions vs {len(golds)} golds")
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        if p.values.shape != g.values.shape:
            raise ShapeError("prediction and gold class counts differ")
        pv, gv = p.values, g.values
        tp += int(((pv == 1.0) & (gv == 1.0)).sum())
        fp += int(((pv == 1.0) & (gv == 0.0)).sum())
        fn += int(((pv == 0.0) & (gv == 1.0)).sum())
    return ConfusionTotals(tp=tp, fp=fp, fn=fn)


def micro_scores(totals: ConfusionTotals, n_samples: int = 0) -> EvalReport:
    precision = totals.tp / (totals.tp + totals.fp) if totals.tp + totals.fp > 0 else 1.0
    recall = totals.tp / (totals.tp + totals.fn) if totals.tp + totals.fn > 0 else 1.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(micro_precision=precision, micro_recall=recall, micro_f1=f1,
                      totals=totals, n_samples=n_samples)


def evaluate(preds: list[LabelVector], golds: list[LabelVector]) -> EvalReport:
    """Accumulate and score in one step."""
    totals = accumulate(preds, golds)
    return micro_scores(totals, n_samples=len(preds))
