"""Confusion matrices and derived metrics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


class LengthMismatch(ValueError):
    pass


class EmptyMatrix(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted."""

    counts: np.ndarray
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("counts must be square")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)
        names = tuple(self.class_names) or tuple(str(i) for i in range(c.shape[0]))
        if len(names) != c.shape[0]:
            raise ValueError("one class name per row")
        object.__setattr__(self, "class_names", names)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def report(self) -> "MetricReport":
        return metrics(self)

    def recall_matrix(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


def evaluate(truth: Sequence[int], pred: Sequence[int], n_classes: int | None = None,
             class_names: Sequence[str] = ()) -> ConfusionMatrix:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise LengthMismatch(f"{truth.size} truth labels vs {pred.size} predictions")
    k = n_classes or len(class_names) or int(max(truth.max(initial=-1), pred.max(initial=-1)) + 1)
    if truth.size and (min(truth.min(), pred.min()) < 0 or max(truth.max(), pred.max()) >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts, tuple(class_names))


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    support: tuple[int, ...]
    macro_f1: float

    def to_dict(self, class_names: Sequence[str]) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                name: {"precision": p, "recall": r, "f1": f, "support": s}
                for name, p, r, f, s in zip(class_names, self.precision, self.recall, self.f1, self.support)
            },
        }


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.divide(num, den, out=np.zeros(num.shape), where=den > 0)


def metrics(cm: ConfusionMatrix) -> MetricReport:
    """Zero denominators give 0 (precision of a never-predicted class, F1 of
    a class with precision = recall = 0)."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no rows")
    c = cm.counts.astype(float)
    tp = np.diag(c)
    precision = _ratio(tp, c.sum(axis=0))
    recall = _ratio(tp, c.sum(axis=1))
    f1 = _ratio(2 * precision * recall, precision + recall)
    return MetricReport(
        accuracy=float(tp.sum() / c.sum()),
        precision=tuple(precision.tolist()),
        recall=tuple(recall.tolist()),
        f1=tuple(f1.tolist()),
        support=tuple(int(s) for s in cm.counts.sum(axis=1)),
        macro_f1=float(f1.mean()),
    )


# --- emitters ---------------------------------------------------------------

def header_line(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} seed={seed}\n"


def csv_text(header: str, columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 10))
    return v


def recall_rows(cm: ConfusionMatrix, stage: int, scenario: str) -> list[list]:
    """Long format: stage, scenario, true class, predicted class, count, recall share."""
    rec = cm.recall_matrix()
    return [[stage, scenario, t, p, int(cm.counts[i, j]), float(rec[i, j])]
            for i, t in enumerate(cm.class_names) for j, p in enumerate(cm.class_names)]


RECALL_COLUMNS = ("stage", "scenario", "true", "predicted", "count", "recall")


def metrics_json(entries: Sequence[dict], config_hash: str, seed: int) -> str:
    """``entries`` are dicts with stage, scenario, arch, confusion, metrics."""
    return json.dumps({"config_hash": config_hash, "seed": seed, "runs": list(entries)},
                      indent=2, sort_keys=True, allow_nan=False) + "\n"


def run_entry(cm: ConfusionMatrix, stage: int, scenario: str, arch: str, split: str = "test") -> dict:
    return {
        "stage": stage,
        "scenario": scenario,
        "arch": arch,
        "split": split,
        "classes": list(cm.class_names),
        "confusion": cm.counts.tolist(),
        "metrics": metrics(cm).to_dict(cm.class_names),
    }
