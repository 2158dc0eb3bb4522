"""Missing-value policy: drop sparse features, then fill per strategy."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ..catalog import FeatureCatalog, Kind
from .dataset import BLOCKS, Dataset


class NoCompleteNeighbors(ValueError):
    pass


@dataclass(frozen=True)
class Strategy:
    kind: str  # Zero | Mean | Median | Mode | KNN
    k: int = 5

    def __post_init__(self):
        if self.kind not in ("Zero", "Mean", "Median", "Mode", "KNN"):
            raise ValueError(f"unknown impute strategy {self.kind!r}")
        if self.k < 1:
            raise ValueError("KNN needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        m = re.fullmatch(r"\s*KNN\s*\(\s*(\d+)\s*\)\s*", text)
        if m:
            return cls("KNN", int(m.group(1)))
        return cls(text.strip())

    def __str__(self) -> str:
        return f"KNN({self.k})" if self.kind == "KNN" else self.kind


@dataclass
class ImputePolicy:
    strategies: dict[str, Strategy] = field(default_factory=dict)
    drop_threshold: float = 0.80
    default: Strategy = Strategy("Median")

    def __post_init__(self):
        if not 0 < self.drop_threshold <= 1:
            raise ValueError("drop_threshold must be in (0, 1]")

    @classmethod
    def from_catalog(cls, catalog: FeatureCatalog, drop_threshold: float = 0.80) -> "ImputePolicy":
        strategies = {}
        for s in catalog:
            strat = Strategy.parse(s.impute)
            if s.kind is Kind.Categorical and strat.kind != "Zero":
                strat = Strategy("Mode")
            strategies[s.id] = strat
        return cls(strategies, drop_threshold)

    def strategy(self, fid: str) -> Strategy:
        return self.strategies.get(fid, self.default)


def _fill_value(col: np.ndarray, strat: Strategy) -> float:
    seen = col[~np.isnan(col)]
    if strat.kind == "Zero" or seen.size == 0:
        return 0.0
    if strat.kind == "Mean":
        return float(seen.mean())
    if strat.kind == "Median":
        return float(np.median(seen))
    vals, counts = np.unique(seen, return_counts=True)
    return float(vals[np.argmax(counts)])  # smallest value among ties


def knn_fill(matrix: np.ndarray, target: int, predictors: list[int], k: int) -> np.ndarray:
    """Fill NaNs of column ``target`` with the mean of its ``k`` nearest rows.

    Distances are Euclidean over the predictor columns observed in the row
    being filled, each standardized by its observed mean and std.  Donors
    must observe the target and all of those predictors; distance ties go
    to the lower row index.
    """
    X = matrix[:, predictors]
    mu = np.nanmean(X, axis=0) if X.size else np.zeros(0)
    sd = np.nanstd(X, axis=0) if X.size else np.ones(0)
    sd = np.where((sd > 0) & np.isfinite(sd), sd, 1.0)
    Z = (X - mu) / sd
    y = matrix[:, target]
    out = y.copy()
    todo = np.flatnonzero(np.isnan(y))
    if todo.size == 0:
        return out
    obs = ~np.isnan(Z)
    has_target = ~np.isnan(y)
    patterns: dict[bytes, list[int]] = {}
    for i in todo:
        patterns.setdefault(obs[i].tobytes(), []).append(i)
    for key, rows in patterns.items():
        cols = np.frombuffer(key, dtype=bool)
        if not cols.any():
            raise NoCompleteNeighbors(f"row {rows[0]} has no observed predictor columns")
        donors = np.flatnonzero(has_target & obs[:, cols].all(axis=1))
        if donors.size == 0:
            raise NoCompleteNeighbors("no donor row observes the target and the row's predictors")
        use = np.flatnonzero(cols)
        D = Z[np.ix_(donors, use)]
        dn = (D * D).sum(axis=1)
        kk = min(k, donors.size)
        for start in range(0, len(rows), 512):
            chunk = rows[start:start + 512]
            Q = Z[np.ix_(chunk, use)]
            qn = (Q * Q).sum(axis=1)
            # BLAS expansion only shortlists; the final order uses exact distances
            approx = qn[:, None] + dn[None, :] - 2.0 * (Q @ D.T)
            kth = np.partition(approx, kk - 1, axis=1)[:, kk - 1]
            slack = 1e-9 * (qn + dn.max()) + 1e-12
            for r, q, a, t, e in zip(chunk, Q, approx, kth, slack):
                cand = np.flatnonzero(a <= t + e)
                exact = ((D[cand] - q) ** 2).sum(axis=1)
                nb = cand[np.lexsort((cand, exact))[:kk]]
                out[r] = math.fsum(y[donors[nb]]) / kk
    return out


def _numeric_cols(ds: Dataset, name: str) -> list[int]:
    b = ds.block(name)
    return [b.column(f) for f in b.groups if ds.catalog.get(f) is None or ds.catalog[f].numeric]


def apply_impute(dataset: Dataset, policy: ImputePolicy) -> Dataset:
    """Drop features whose missing fraction exceeds the threshold, then fill
    the rest.  Simple strategies run first so KNN can lean on them."""
    frac = dataset.missing_fraction()
    ds = dataset.drop_features([f for f, p in frac.items() if p > policy.drop_threshold])
    for name in BLOCKS:
        b = ds.block(name)
        mask = ds.mask_for(name)
        flat = b.values if mask is None else b.values[mask > 0]  # (cells, F) copy for time blocks
        knn = []
        for f, cols in b.groups.items():
            strat = policy.strategy(f)
            j = cols[0]
            if strat.kind == "KNN":
                knn.append((j, strat.k))
                continue
            col = flat[:, j]
            col[np.isnan(col)] = _fill_value(col, strat)
        numeric = _numeric_cols(ds, name)
        filled = {}
        for j, k in knn:
            preds = [c for c in numeric if c != j]
            filled[j] = knn_fill(flat, j, preds, k)
        for j, col in filled.items():
            flat[:, j] = col
        if mask is not None:
            b.values[mask > 0] = flat
    return ds
