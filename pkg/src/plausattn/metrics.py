"""Attention-plausibility and task-performance metrics.

Protocol: per-example min-max scaling of the attention map, AUPRC against the
binary annotation (step summation over descending score thresholds), recall
and specificity at threshold 0.5, macro F-score for the task labels.
Examples whose annotation leaves a ratio undefined are excluded from that
metric's mean and counted, never silently dropped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


@dataclass
class ScaledMap:
    values: np.ndarray
    degenerate: bool = False


def minmax_scale(values) -> ScaledMap:
    """(x - min)/(max - min); a constant map scales to all zeros, flagged degenerate."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size < 1:
        raise ValueError("minmax_scale needs at least one value")
    lo = v.min()
    hi = v.max()
    if hi == lo:
        return ScaledMap(np.zeros_like(v), degenerate=True)
    return ScaledMap((v - lo) / (hi - lo))


def auprc(scores, annotation) -> float:
    """Area under the precision/recall curve.

    Step (rectangular) summation over descending unique score thresholds with
    ties grouped: AP = sum_k (R_k - R_{k-1}) * P_k.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(annotation, dtype=np.int64).reshape(-1)
    if s.shape != y.shape:
        raise ValueError("scores and annotation must have equal length")
    n_pos = int(y.sum())
    if n_pos < 1:
        raise ValueError("annotation has no positive token")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # group boundaries: last index of each run of equal scores
    boundary = np.ones(s_sorted.size, dtype=bool)
    boundary[:-1] = s_sorted[:-1] != s_sorted[1:]
    tp = np.cumsum(y_sorted)[boundary].astype(np.float64)
    pp = np.flatnonzero(boundary).astype(np.float64) + 1.0
    precision = tp / pp
    recall = tp / n_pos
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


def recall_specificity(scaled, annotation, threshold: float = 0.5
                       ) -> tuple[Optional[float], Optional[float]]:
    """Recall and specificity of ``value > threshold`` against the annotation.

    Returns None for a ratio whose denominator is empty (no positive /
    no negative tokens in the annotation); the caller must exclude it.
    """
    v = np.asarray(scaled, dtype=np.float64).reshape(-1)
    y = np.asarray(annotation, dtype=np.int64).reshape(-1)
    predicted = v > threshold
    pos = y == 1
    neg = ~pos
    recall = float((predicted & pos).sum() / pos.sum()) if pos.any() else None
    specificity = float((~predicted & neg).sum() / neg.sum()) if neg.any() else None
    return recall, specificity


def macro_f(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Unweighted mean of per-class F1 over classes present in either side."""
    preds = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(labels, dtype=np.int64)
    if preds.size == 0 or preds.shape != gold.shape:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    return float(np.mean([f for _, f in _per_class_f(preds, gold)]))


def _per_class_f(preds: np.ndarray, gold: np.ndarray) -> list[tuple[int, float]]:
    out = []
    for c in sorted(set(gold.tolist()) | set(preds.tolist())):
        tp = int(((preds == c) & (gold == c)).sum())
        fp = int(((preds == c) & (gold != c)).sum())
        fn = int(((preds != c) & (gold == c)).sum())
        denom = 2 * tp + fp + fn
        out.append((c, 2 * tp / denom if denom else 0.0))
    return out


@dataclass
class MetricsReport:
    """Task F-score plus plausibility metrics averaged over annotated examples."""

    macro_f: float
    per_class_f: dict[int, float]
    n_examples: int
    mean_auprc: Optional[float] = None
    mean_recall: Optional[float] = None
    mean_specificity: Optional[float] = None
    n_annotated: int = 0
    n_excluded_auprc: int = 0
    n_excluded_recall: int = 0
    n_excluded_specificity: int = 0

    def to_dict(self) -> dict:
        d = {
            "macro_f": self.macro_f,
            "per_class_f": {str(k): v for k, v in self.per_class_f.items()},
            "n_examples": self.n_examples,
            "n_annotated": self.n_annotated,
            "n_excluded_auprc": self.n_excluded_auprc,
            "n_excluded_recall": self.n_excluded_recall,
            "n_excluded_specificity": self.n_excluded_specificity,
        }
        for name in ("mean_auprc", "mean_recall", "mean_specificity"):
            value = getattr(self, name)
            if value is not None:
                d[name] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            macro_f=d["macro_f"],
            per_class_f={int(k): v for k, v in d["per_class_f"].items()},
            n_examples=d["n_examples"],
            mean_auprc=d.get("mean_auprc"),
            mean_recall=d.get("mean_recall"),
            mean_specificity=d.get("mean_specificity"),
            n_annotated=d.get("n_annotated", 0),
            n_excluded_auprc=d.get("n_excluded_auprc", 0),
            n_excluded_recall=d.get("n_excluded_recall", 0),
            n_excluded_specificity=d.get("n_excluded_specificity", 0),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "MetricsReport":
        return cls.from_dict(json.loads(s))


@dataclass
class ExampleOutcome:
    """Model outputs for one example, ready for metric computation.

    ``segments`` pairs the raw attention scores of each segment with its
    annotation (None when the example carries none).
    """

    example_id: str
    prediction: int
    label: int
    segments: list[tuple[np.ndarray, Optional[Sequence[int]]]]


def example_plausibility(outcome: ExampleOutcome
                         ) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """Per-example (auprc, recall, specificity), averaging the segments that
    define each metric; None where no segment defines it."""
    auprcs, recalls, specs = [], [], []
    for scores, annotation in outcome.segments:
        if annotation is None:
            continue
        scaled = minmax_scale(scores)
        if sum(annotation) >= 1:
            auprcs.append(auprc(scaled.values, annotation))
        r, sp = recall_specificity(scaled.values, annotation)
        if r is not None:
            recalls.append(r)
        if sp is not None:
            specs.append(sp)

    def agg(vals):
        return float(np.mean(vals)) if vals else None

    return agg(auprcs), agg(recalls), agg(specs)


def evaluate_split(outcomes: Sequence[ExampleOutcome]) -> MetricsReport:
    """Aggregate task and plausibility metrics over one split."""
    if not outcomes:
        raise ValueError("no outcomes to evaluate")
    preds = np.array([o.prediction for o in outcomes], dtype=np.int64)
    gold = np.array([o.label for o in outcomes], dtype=np.int64)
    report = MetricsReport(
        macro_f=macro_f(preds, gold),
        per_class_f=dict(_per_class_f(preds, gold)),
        n_examples=len(outcomes),
    )
    auprcs, recalls, specs = [], [], []
    for o in outcomes:
        if all(ann is None for _, ann in o.segments):
            continue
        report.n_annotated += 1
        a, r, sp = example_plausibility(o)
        if a is None:
            report.n_excluded_auprc += 1
        else:
            auprcs.append(a)
        if r is None:
            report.n_excluded_recall += 1
        else:
            recalls.append(r)
        if sp is None:
            report.n_excluded_specificity += 1
        else:
            specs.append(sp)
    if auprcs:
        report.mean_auprc = float(np.mean(auprcs))
    if recalls:
        report.mean_recall = float(np.mean(recalls))
    if specs:
        report.mean_specificity = float(np.mean(specs))
    return report


def write_example_metrics_csv(outcomes: Sequence[ExampleOutcome], path: str | Path) -> None:
    """Per-example metric dump: id, auprc, recall, specificity."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "auprc", "recall", "specificity"])
        for o in outcomes:
            a, r, sp = example_plausibility(o)
            writer.writerow([o.example_id] + ["" if v is None else repr(v) for v in (a, r, sp)])
