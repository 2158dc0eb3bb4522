"""One-hot encoding plus robust and unit-norm scaling, fit on training rows."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..catalog import Kind
from .dataset import BLOCKS, Block, Dataset


class NotFitted(RuntimeError):
    pass


@dataclass
class ColumnParams:
    kind: str  # "onehot" | "scale" | "pass"
    categories: list[str] = field(default_factory=list)
    median: float = 0.0
    iqr: float = 1.0
    norm: float = 1.0


def robust_unit_params(x: np.ndarray) -> tuple[float, float, float]:
    """Median, IQR divisor and unit-norm divisor for one training column."""
    if x.size == 0:
        return 0.0, 1.0, 1.0
    med = float(np.median(x))
    q1, q3 = np.percentile(x, [25, 75])
    iqr = float(q3 - q1) or 1.0
    norm = float(np.linalg.norm((x - med) / iqr)) or 1.0
    return med, iqr, norm


@dataclass
class Transform:
    params: dict[str, dict[str, ColumnParams]] = field(default_factory=dict)

    @classmethod
    def fit(cls, train: Dataset) -> "Transform":
        if train.encoded:
            raise ValueError("dataset is already encoded")
        params: dict[str, dict[str, ColumnParams]] = {}
        for name in BLOCKS:
            b = train.block(name)
            params[name] = {}
            for f in b.groups:
                spec = train.catalog.get(f)
                x = train.cells(name, f)
                x = x[~np.isnan(x)]
                if spec is not None and spec.kind is Kind.Categorical:
                    cats = train.categories.get(f, [])
                    seen = sorted({cats[int(c)] for c in x})
                    params[name][f] = ColumnParams("onehot", categories=seen)
                elif spec is not None and spec.kind is Kind.Binary:
                    params[name][f] = ColumnParams("pass")
                else:
                    med, iqr, norm = robust_unit_params(x)
                    params[name][f] = ColumnParams("scale", median=med, iqr=iqr, norm=norm)
        return cls(params)

    def apply(self, dataset: Dataset) -> Dataset:
        if not self.params:
            raise NotFitted("transform has no parameters")
        blocks = {}
        for name in BLOCKS:
            b = dataset.block(name)
            mask = dataset.mask_for(name)
            n_lead = b.values.shape[:-1]
            cols, groups, parts = [], {}, []
            for f, p in self.params[name].items():
                x = b.values[..., b.column(f)]
                if p.kind == "onehot":
                    cats = dataset.categories.get(f, [])
                    lookup = {c: i for i, c in enumerate(p.categories)}
                    where = np.full(x.shape, -1)
                    ok = ~np.isnan(x)
                    where[ok] = [lookup.get(cats[int(c)], -1) for c in x[ok]]
                    out = np.zeros(n_lead + (len(p.categories),))
                    idx = np.nonzero(where >= 0)
                    out[idx + (where[idx],)] = 1.0
                    groups[f] = list(range(len(cols), len(cols) + len(p.categories)))
                    cols += [f"{f}={c}" for c in p.categories]
                    parts.append(out)
                else:
                    y = x if p.kind == "pass" else (x - p.median) / p.iqr / p.norm
                    groups[f] = [len(cols)]
                    cols.append(f)
                    parts.append(y[..., None])
            values = np.concatenate(parts, axis=-1) if parts else np.zeros(n_lead + (0,))
            if mask is not None:
                values[mask == 0] = 0.0
            blocks[name] = Block(cols, groups, values)
        return replace(dataset.copy(), fixed=blocks["fixed"], semesters=blocks["semesters"],
                       years=blocks["years"], encoded=True)

    def to_json(self) -> str:
        out = {name: {f: vars(p) for f, p in cols.items()} for name, cols in self.params.items()}
        return json.dumps(out, sort_keys=False, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "Transform":
        raw = json.loads(text)
        return cls({name: {f: ColumnParams(**p) for f, p in cols.items()} for name, cols in raw.items()})


def encode_and_scale(train: Dataset, *others: Dataset) -> tuple[Transform, list[Dataset]]:
    """Fit on ``train`` and apply to ``train`` and every other dataset."""
    t = Transform.fit(train)
    return t, [t.apply(d) for d in (train, *others)]
