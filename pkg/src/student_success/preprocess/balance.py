"""Class balancing and group-size capping."""

from __future__ import annotations

import enum

import numpy as np

from ..catalog import Kind
from .dataset import BLOCKS, Dataset, concat

MASK_FRACTION = 0.30
SWEEPS = 5


class EmptyClass(ValueError):
    pass


class BalanceMethod(str, enum.Enum):
    EqualRandom = "EqualRandom"
    MiceOversample = "MiceOversample"


def _class_rows(labels: np.ndarray, n_classes: int | None) -> list[np.ndarray]:
    k = int(labels.max()) + 1 if n_classes is None else n_classes
    rows = [np.flatnonzero(labels == c) for c in range(k)]
    for c, r in enumerate(rows):
        if r.size == 0:
            raise EmptyClass(f"class {c} has no rows")
    return rows


def _flatten(ds: Dataset) -> tuple[np.ndarray, list[tuple[str, tuple]]]:
    """Numeric valid cells as one (n, p) matrix plus where each column lives.
    Time cells count as valid when the slice is observed for *any* row; the
    per-row mask is handled by the caller."""
    cols, where = [], []
    for name in BLOCKS:
        b = ds.block(name)
        for f in b.groups:
            spec = ds.catalog.get(f)
            if spec is not None and spec.kind is Kind.Categorical:
                continue
            j = b.column(f)
            if name == "fixed":
                cols.append(b.values[:, j])
                where.append((name, (j,)))
            else:
                for t in range(b.values.shape[1]):
                    cols.append(b.values[:, t, j])
                    where.append((name, (t, j)))
    return (np.column_stack(cols) if cols else np.zeros((ds.n, 0))), where


def _valid(ds: Dataset, where) -> np.ndarray:
    out = np.ones((ds.n, len(where)), dtype=bool)
    for c, (name, pos) in enumerate(where):
        if name != "fixed":
            out[:, c] = ds.mask_for(name)[:, pos[0]] > 0
    return out


def _write_back(ds: Dataset, X: np.ndarray, where) -> None:
    for c, (name, pos) in enumerate(where):
        b = ds.block(name)
        if name == "fixed":
            b.values[:, pos[0]] = X[:, c]
        else:
            b.values[:, pos[0], pos[1]] = X[:, c]


def mice_regressors(X: np.ndarray, ridge: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Means and the (p, p) matrix B with x_j ≈ μ_j + Σ_k B[j,k] (x_k − μ_k)
    (B has a zero diagonal), from the ridge-regularized precision matrix."""
    mu = X.mean(axis=0)
    C = np.cov(X, rowvar=False).reshape(X.shape[1], X.shape[1])
    scale = max(float(np.trace(C)) / max(C.shape[0], 1), 1e-12)
    P = np.linalg.inv(C + ridge * scale * np.eye(C.shape[0]))
    d = np.diag(P)
    B = -P / d[:, None]
    np.fill_diagonal(B, 0.0)
    return mu, B


def mice_synthesize(ds: Dataset, members: np.ndarray, count: int, rng: np.random.Generator) -> Dataset:
    """``count`` synthetic rows built from random members of one class."""
    donors = rng.choice(members, size=count, replace=True)
    synth = ds.subset(donors)
    synth.ids = np.array([f"{sid}~mice{i}" for i, sid in enumerate(synth.ids)], dtype=object)
    X_orig, where = _flatten(ds.subset(members))
    if not where:
        return synth
    valid_orig = _valid(ds.subset(members), where)
    X_fit = np.where(valid_orig, X_orig, np.nan)
    col_mean = np.nan_to_num(np.nanmean(X_fit, axis=0)) if X_fit.size else np.zeros(len(where))
    X_fit = np.where(np.isnan(X_fit), col_mean, X_fit)
    mu, B = mice_regressors(X_fit)
    lo, hi = X_fit.min(axis=0), X_fit.max(axis=0)

    X, _ = _flatten(synth)
    valid = _valid(synth, where)
    masked = valid & (rng.random(X.shape) < MASK_FRACTION)
    X = X.copy()
    X[masked] = np.broadcast_to(mu, X.shape)[masked]
    for _ in range(SWEEPS):
        for j in range(X.shape[1]):
            rows = masked[:, j]
            if rows.any():
                X[rows, j] = mu[j] + (X[rows] - mu) @ B[j]
    X[masked] = np.clip(X, lo, hi)[masked]
    _write_back(synth, X, where)
    return synth


def balance_classes(dataset: Dataset, method: BalanceMethod | str, seed: int = 0,
                    labels: np.ndarray | None = None, n_classes: int | None = None) -> tuple[Dataset, np.ndarray]:
    """Equalize class counts.  ``labels`` overrides ``dataset.labels`` (for
    collapsed scenario classes).  Returns the dataset and its labels."""
    method = BalanceMethod(method)
    y = dataset.labels if labels is None else np.asarray(labels)
    rows = _class_rows(y, n_classes)
    rng = np.random.default_rng([int(seed), 0xBA1])
    if method is BalanceMethod.EqualRandom:
        m = min(r.size for r in rows)
        keep = np.sort(np.concatenate([rng.choice(r, size=m, replace=False) if r.size > m else r for r in rows]))
        return dataset.subset(keep), y[keep]
    target = max(r.size for r in rows)
    parts, labs = [dataset], [y]
    for c, r in enumerate(rows):
        if r.size < target:
            parts.append(mice_synthesize(dataset, r, target - r.size, rng))
            labs.append(np.full(target - r.size, c, dtype=y.dtype))
    if len(parts) == 1:
        return dataset.copy(), y.copy()
    out = concat(parts)
    out_y = np.concatenate(labs)
    if labels is None:
        out.labels = out_y
    return out, out_y


def cap_groups(dataset: Dataset, feature: str, max_ratio: float = 1.0, seed: int = 0) -> Dataset:
    """Undersample so no category of a fixed categorical ``feature`` has more
    than ``max_ratio`` times the rows of the smallest one."""
    col = dataset.fixed.values[:, dataset.fixed.column(feature)]
    groups = [np.flatnonzero(col == v) for v in np.unique(col[~np.isnan(col)])]
    if not groups:
        return dataset.copy()
    cap = int(np.floor(min(g.size for g in groups) * max_ratio))
    rng = np.random.default_rng([int(seed), 0xCA9])
    keep = [np.flatnonzero(np.isnan(col))]
    for g in groups:
        keep.append(rng.choice(g, size=cap, replace=False) if g.size > cap else g)
    return dataset.subset(np.sort(np.concatenate(keep)))
