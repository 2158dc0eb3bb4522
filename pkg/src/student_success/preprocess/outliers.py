"""Impossible values, interquartile fences and quantile binning."""

from __future__ import annotations

import numpy as np

from ..catalog import FeatureCatalog, Kind
from .dataset import BLOCKS, Dataset

N_BINS = 10
MAX_PASSES = 100


def fences(x: np.ndarray) -> tuple[float, float]:
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    return q1 - 1.5 * iqr, q3 + 1.5 * iqr


def clamp_iqr(x: np.ndarray) -> np.ndarray:
    """Clamp values outside the fences to the in-fence max/min, repeated
    until nothing falls outside (so a second call is a no-op)."""
    x = x.copy()
    for _ in range(MAX_PASSES):
        if x.size == 0:
            break
        lo, hi = fences(x)
        if lo == hi:
            break
        out = (x < lo) | (x > hi)
        if not out.any():
            break
        inside = x[~out]
        x[x > hi] = inside.max()
        x[x < lo] = inside.min()
    return x


def bin_quantiles(x: np.ndarray, n_bins: int = N_BINS) -> np.ndarray:
    """Replace each value by the median of its quantile bin."""
    edges = np.quantile(x, np.linspace(0, 1, n_bins + 1))
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    out = x.copy()
    for b in np.unique(idx):
        sel = idx == b
        out[sel] = np.median(x[sel])
    return out


def count_impossible(dataset: Dataset) -> dict[str, int]:
    counts = {}
    for name in BLOCKS:
        for f in dataset.block(name).groups:
            spec = dataset.catalog.get(f)
            if spec is None or not spec.numeric or spec.possible_range is None:
                continue
            x = dataset.cells(name, f)
            lo, hi = spec.possible_range
            n = int(((x < lo) | (x > hi)).sum())
            if n:
                counts[f] = n
    return counts


def treat_column(x: np.ndarray, kind: Kind, possible_range) -> np.ndarray:
    """Treat one column of cells; NaNs pass through untouched."""
    x = x.copy()
    seen = ~np.isnan(x)
    if possible_range is not None:
        lo, hi = possible_range
        bad = seen & ((x < lo) | (x > hi))
        if bad.any():
            good = seen & ~bad
            x[bad] = np.median(x[good]) if good.any() else np.clip(x[bad], lo, hi)
    v = x[seen]
    if v.size < 4 or kind in (Kind.Binary, Kind.Categorical):
        return x
    lo, hi = fences(v)
    if lo == hi or not ((v < lo) | (v > hi)).any():
        return x
    if kind is Kind.Discrete:
        if np.unique(v).size > N_BINS:
            x[seen] = bin_quantiles(v)
    else:
        x[seen] = clamp_iqr(v)
    return x


def treat_outliers(dataset: Dataset, catalog: FeatureCatalog | None = None) -> Dataset:
    """Impossible values become the column median of the possible ones;
    continuous columns are clamped to the fences, discrete columns with
    out-of-fence values and more than ten levels are binned."""
    catalog = catalog or dataset.catalog
    ds = dataset.copy()
    for name in BLOCKS:
        b = ds.block(name)
        mask = ds.mask_for(name)
        for f in b.groups:
            spec = catalog.get(f)
            if spec is None or not spec.numeric:
                continue
            j = b.column(f)
            if mask is None:
                b.values[:, j] = treat_column(b.values[:, j], spec.kind, spec.possible_range)
            else:
                valid = mask > 0
                col = b.values[..., j]
                col[valid] = treat_column(col[valid], spec.kind, spec.possible_range)
    return ds
