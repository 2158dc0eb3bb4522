"""Cohort-level permutation importance and per-student impacts."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metrics import evaluate
from .model import stage_inputs
from .nn import Inputs, MultiBranchNet
from .preprocess.dataset import BLOCKS, Dataset
from .staging import Stage


class Method(str, enum.Enum):
    Occlusion = "Occlusion"
    GradInput = "GradInput"


@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    score: float
    scope: str = "overall"  # overall | per-class | student id
    rank: int = 0
    class_name: str = ""


_INPUT_ATTR = {"fixed": "fixed", "semesters": "semesters", "years": "years"}


def visible_features(dataset: Dataset, stage: Stage) -> list[tuple[str, str, list[int]]]:
    """(block, feature, columns) for every feature the stage's model sees."""
    stage = Stage.parse(stage)
    out = []
    for name in BLOCKS:
        if name == "semesters" and stage.semester_slices == 0:
            continue
        if name == "years" and stage.year_slices == 0:
            continue
        for f, cols in dataset.block(name).groups.items():
            out.append((name, f, list(cols)))
    return out


def _copy_inputs(x: Inputs) -> Inputs:
    def c(a):
        return None if a is None else a.copy()
    return Inputs(x.fixed.copy(), c(x.semesters), c(x.semester_mask), c(x.years), c(x.year_mask))


def _permute(x: Inputs, block: str, cols: list[int], rng: np.random.Generator) -> Inputs:
    """Shuffle a feature's columns across rows, as one unit; time blocks get
    an independent shuffle per slice (padding follows the mask)."""
    out = _copy_inputs(x)
    a = getattr(out, _INPUT_ATTR[block])
    n = a.shape[0]
    if block == "fixed":
        a[:, cols] = a[rng.permutation(n)][:, cols]
    else:
        mask = out.semester_mask if block == "semesters" else out.year_mask
        for t in range(a.shape[1]):
            perm = rng.permutation(n)
            a[:, t, cols] = a[perm][:, t, cols]
            a[mask[:, t] == 0, t, :] = 0.0
    return out


def _rank(entries: list[ImportanceEntry]) -> list[ImportanceEntry]:
    order = sorted(range(len(entries)), key=lambda i: (-abs(entries[i].score), i))
    return [ImportanceEntry(entries[i].feature, entries[i].score, entries[i].scope, r + 1, entries[i].class_name)
            for r, i in enumerate(order)]


def permutation_importance(model: MultiBranchNet, dataset: Dataset, labels: np.ndarray, stage: Stage,
                           repeats: int = 5, seed: int = 0) -> list[ImportanceEntry]:
    """Accuracy drop when a feature is shuffled, averaged over ``repeats``."""
    x = stage_inputs(dataset, stage)
    y = np.asarray(labels)
    base = float((model.predict(x) == y).mean())
    entries = []
    for k, (block, f, cols) in enumerate(visible_features(dataset, stage)):
        rng = np.random.default_rng([int(seed), k])
        drops = [base - float((model.predict(_permute(x, block, cols, rng)) == y).mean()) for _ in range(repeats)]
        entries.append(ImportanceEntry(f, math.fsum(drops) / repeats))
    return _rank(entries)


def recall_drops(model: MultiBranchNet, dataset: Dataset, labels: np.ndarray, stage: Stage,
                 features: Sequence[str], n_classes: int, repeats: int = 5, seed: int = 0) -> np.ndarray:
    """(len(features), n_classes) mean drop in per-class recall under permutation."""
    x = stage_inputs(dataset, stage)
    y = np.asarray(labels)
    base = evaluate(y, model.predict(x), n_classes).recall_matrix().diagonal()
    where = {f: (b, c) for b, f, c in visible_features(dataset, stage)}
    out = np.zeros((len(features), n_classes))
    for i, f in enumerate(features):
        block, cols = where[f]
        rng = np.random.default_rng([int(seed), 0xC1A55, i])
        rec = [evaluate(y, model.predict(_permute(x, block, cols, rng)), n_classes).recall_matrix().diagonal()
               for _ in range(repeats)]
        out[i] = base - np.mean(rec, axis=0)
    return out


def contribution_ratios(drops: np.ndarray) -> np.ndarray:
    """Negative drops (noise) count as 0; each row is normalized to sum to 1
    and all-zero rows stay zero."""
    d = np.clip(np.asarray(drops, dtype=float), 0.0, None)
    s = d.sum(axis=1, keepdims=True)
    return np.divide(d, s, out=np.zeros_like(d), where=s > 0)


def per_label_contribution(model: MultiBranchNet, dataset: Dataset, labels: np.ndarray, stage: Stage,
                           top_k: int, n_classes: int, repeats: int = 5, seed: int = 0,
                           importance: list[ImportanceEntry] | None = None) -> tuple[list[str], np.ndarray]:
    """Top-``top_k`` overall features and their feature × class ratio matrix."""
    importance = importance or permutation_importance(model, dataset, labels, stage, repeats, seed)
    top = [e.feature for e in importance[:top_k]]
    return top, contribution_ratios(recall_drops(model, dataset, labels, stage, top, n_classes, repeats, seed))


# --- per student ------------------------------------------------------------

@dataclass
class Reference:
    """Replacement values for occlusion: per-column training medians on
    numeric columns, zeros on one-hot groups."""

    fixed: np.ndarray
    semesters: np.ndarray
    years: np.ndarray

    @classmethod
    def from_training(cls, train: Dataset) -> "Reference":
        vals = {}
        for name in BLOCKS:
            b = train.block(name)
            mask = train.mask_for(name)
            flat = b.values if mask is None else b.values[mask > 0]
            med = np.median(flat, axis=0) if len(flat) else np.zeros(b.width)
            for f, cols in b.groups.items():
                if len(cols) > 1 or "=" in b.columns[cols[0]]:
                    med[cols] = 0.0
            vals[name] = med
        return cls(vals["fixed"], vals["semesters"], vals["years"])

    def get(self, block: str) -> np.ndarray:
        return getattr(self, block)


def _row(x: Inputs, i: int) -> Inputs:
    return x.take(slice(i, i + 1))


def occlusion_impacts(model: MultiBranchNet, x: Inputs, features, reference: Reference,
                      target: int | None = None) -> tuple[int, np.ndarray]:
    """For a one-row ``x``: p(target | x) − p(target | x with the feature
    set to its reference).  ``target`` defaults to the predicted class."""
    p0 = model.predict_proba(x)[0]
    target = int(np.argmax(p0)) if target is None else target
    out = np.zeros(len(features))
    for k, (block, _, cols) in enumerate(features):
        xo = _copy_inputs(x)
        a = getattr(xo, _INPUT_ATTR[block])
        ref = reference.get(block)
        if block == "fixed":
            a[0, cols] = ref[cols]
        else:
            mask = xo.semester_mask if block == "semesters" else xo.year_mask
            valid = mask[0] > 0
            a[0][np.ix_(valid, cols)] = ref[cols]
        out[k] = p0[target] - model.predict_proba(xo)[0, target]
    return target, out


def gradinput_impacts(model: MultiBranchNet, x: Inputs, features, target: int | None = None) -> tuple[int, np.ndarray]:
    """∂logit_target/∂x · x summed over a feature's columns (and slices)."""
    logits = model.forward(x)
    target = int(np.argmax(logits[0])) if target is None else target
    d = np.zeros_like(logits)
    d[0, target] = 1.0
    model.zero_grad()
    g = model.backward(d)
    out = np.zeros(len(features))
    for k, (block, _, cols) in enumerate(features):
        grad = getattr(g, _INPUT_ATTR[block])
        val = getattr(x, _INPUT_ATTR[block])
        out[k] = float((grad[..., cols] * val[..., cols]).sum())
    model.zero_grad()
    return target, out


def student_attribution(model: MultiBranchNet, dataset: Dataset, index: int, stage: Stage,
                        method: Method | str = Method.Occlusion, top_k: int = 5,
                        reference: Reference | None = None) -> list[ImportanceEntry]:
    """Top-``top_k`` signed impacts for one student, by |impact|."""
    method = Method(method)
    x = _row(stage_inputs(dataset, stage), index)
    features = visible_features(dataset, stage)
    if method is Method.Occlusion:
        _, impacts = occlusion_impacts(model, x, features, reference or Reference.from_training(dataset))
    else:
        _, impacts = gradinput_impacts(model, x, features)
    sid = str(dataset.ids[index])
    ranked = _rank([ImportanceEntry(f, float(v), sid) for (_, f, _), v in zip(features, impacts)])
    return ranked[:top_k]


IMPORTANCE_COLUMNS = ("scope", "feature", "class", "score", "rank")


def importance_rows(overall: list[ImportanceEntry], top: list[str] | None = None,
                    ratios: np.ndarray | None = None, class_names: Sequence[str] = ()) -> list[list]:
    rows = [["overall", e.feature, "", e.score, e.rank] for e in overall]
    if top is not None and ratios is not None:
        rank = {e.feature: e.rank for e in overall}
        for i, f in enumerate(top):
            for j, c in enumerate(class_names):
                rows.append(["per-class", f, c, float(ratios[i, j]), rank.get(f, i + 1)])
    return rows
