"""Numeric dataset: a fixed block plus padded semester/year blocks.

Categorical features are held as float codes into ``Dataset.categories``
until :func:`~student_success.preprocess.encode.encode_and_scale` expands
them one-hot.  Missing cells are NaN; padding beyond a student's last slice
is 0 with mask 0.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ..catalog import FeatureCatalog, Kind, Temporality
from ..records import StudentRecord
from ..staging import DEFAULT_HORIZON, LabelClass, StagedSample, Unlabeled, assign_label, transfer_direction

BLOCKS = ("fixed", "semesters", "years")
TEMPORALITY = {"fixed": Temporality.Fixed, "semesters": Temporality.PerSemester, "years": Temporality.PerYear}


@dataclass
class Block:
    """Columns of one temporality.  ``groups`` maps a feature id to its
    column indices (one column, or several after one-hot encoding)."""

    columns: list[str]
    groups: dict[str, list[int]]
    values: np.ndarray  # (n, F) for fixed, (n, T, F) for time blocks

    @classmethod
    def plain(cls, features: Sequence[str], values: np.ndarray) -> "Block":
        return cls(list(features), {f: [j] for j, f in enumerate(features)}, values)

    @property
    def features(self) -> list[str]:
        return list(self.groups)

    @property
    def width(self) -> int:
        return len(self.columns)

    def column(self, feature: str) -> int:
        (j,) = self.groups[feature]
        return j

    def take_rows(self, idx) -> "Block":
        return Block(list(self.columns), {k: list(v) for k, v in self.groups.items()}, self.values[idx].copy())

    def drop(self, features: Iterable[str]) -> "Block":
        drop = set(features) & set(self.groups)
        if not drop:
            return self.copy()
        keep_cols = [j for f, cols in self.groups.items() if f not in drop for j in cols]
        remap = {old: new for new, old in enumerate(keep_cols)}
        groups = {f: [remap[j] for j in cols] for f, cols in self.groups.items() if f not in drop}
        return Block([self.columns[j] for j in keep_cols], groups, self.values[..., keep_cols].copy())

    def copy(self) -> "Block":
        return Block(list(self.columns), {k: list(v) for k, v in self.groups.items()}, self.values.copy())


@dataclass
class Dataset:
    catalog: FeatureCatalog
    ids: np.ndarray
    labels: np.ndarray
    directions: np.ndarray  # object array of Direction | None
    has_fafsa: np.ndarray
    fixed: Block
    semesters: Block
    years: Block
    semester_mask: np.ndarray
    year_mask: np.ndarray
    categories: dict[str, list[str]] = field(default_factory=dict)
    encoded: bool = False

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def block(self, name: str) -> Block:
        return getattr(self, name)

    def mask_for(self, name: str) -> np.ndarray | None:
        return {"fixed": None, "semesters": self.semester_mask, "years": self.year_mask}[name]

    @property
    def column_index(self) -> dict[str, dict[str, list[int]]]:
        return {b: {f: list(c) for f, c in self.block(b).groups.items()} for b in BLOCKS}

    def block_of(self, feature: str) -> str:
        for b in BLOCKS:
            if feature in self.block(b).groups:
                return b
        raise KeyError(feature)

    @property
    def features(self) -> list[str]:
        return [f for b in BLOCKS for f in self.block(b).groups]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self,
            ids=self.ids[idx].copy(),
            labels=self.labels[idx].copy(),
            directions=self.directions[idx].copy(),
            has_fafsa=self.has_fafsa[idx].copy(),
            fixed=self.fixed.take_rows(idx),
            semesters=self.semesters.take_rows(idx),
            years=self.years.take_rows(idx),
            semester_mask=self.semester_mask[idx].copy(),
            year_mask=self.year_mask[idx].copy(),
            categories={k: list(v) for k, v in self.categories.items()},
        )

    def copy(self) -> "Dataset":
        return self.subset(np.arange(self.n))

    def drop_features(self, features: Iterable[str]) -> "Dataset":
        features = set(features)
        return replace(
            self,
            catalog=self.catalog.without(features),
            fixed=self.fixed.drop(features),
            semesters=self.semesters.drop(features),
            years=self.years.drop(features),
            categories={k: list(v) for k, v in self.categories.items() if k not in features},
        )

    def cells(self, name: str, feature: str) -> np.ndarray:
        """Values of one single-column feature over valid cells (1-D copy)."""
        b = self.block(name)
        j = b.column(feature)
        if name == "fixed":
            return b.values[:, j].copy()
        return b.values[..., j][self.mask_for(name) > 0]

    def missing_fraction(self) -> dict[str, float]:
        out = {}
        for name in BLOCKS:
            b = self.block(name)
            mask = self.mask_for(name)
            for f, cols in b.groups.items():
                v = b.values[..., cols[0]]
                if mask is None:
                    total = v.size
                    miss = int(np.isnan(v).sum())
                else:
                    valid = mask > 0
                    total = int(valid.sum())
                    miss = int(np.isnan(v[valid]).sum())
                out[f] = miss / total if total else 1.0
        return out

    def missing_count(self) -> int:
        total = int(np.isnan(self.fixed.values).sum())
        for name in ("semesters", "years"):
            v = self.block(name).values
            total += int(np.isnan(v[self.mask_for(name) > 0]).sum())
        return total

    def sample(self, i: int) -> StagedSample:
        return StagedSample(
            fixed=self.fixed.values[i].copy(),
            semesters=self.semesters.values[i].copy(),
            semester_mask=self.semester_mask[i].copy(),
            years=self.years.values[i].copy(),
            year_mask=self.year_mask[i].copy(),
            label=int(self.labels[i]),
            student_id=str(self.ids[i]),
        )


def concat(datasets: Sequence[Dataset]) -> Dataset:
    first = datasets[0]

    def cat_block(name):
        b = first.block(name)
        return Block(list(b.columns), {k: list(v) for k, v in b.groups.items()},
                     np.concatenate([d.block(name).values for d in datasets]))

    return replace(
        first,
        ids=np.concatenate([d.ids for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]),
        directions=np.concatenate([d.directions for d in datasets]),
        has_fafsa=np.concatenate([d.has_fafsa for d in datasets]),
        fixed=cat_block("fixed"),
        semesters=cat_block("semesters"),
        years=cat_block("years"),
        semester_mask=np.concatenate([d.semester_mask for d in datasets]),
        year_mask=np.concatenate([d.year_mask for d in datasets]),
    )


@dataclass
class BuildResult:
    dataset: Dataset
    unlabeled: dict[str, int]


def build_dataset(records: Sequence[StudentRecord], catalog: FeatureCatalog,
                  horizon: dt.date = DEFAULT_HORIZON, n_semesters: int | None = None) -> BuildResult:
    """Numericize labeled records.  Continuation/Indeterminate records are
    left out and counted in ``unlabeled``."""
    kept, labels, directions = [], [], []
    unlabeled = {u.value: 0 for u in Unlabeled}
    for r in records:
        label = assign_label(r.timeline, horizon)
        if isinstance(label, Unlabeled):
            unlabeled[label.value] += 1
            continue
        kept.append(r)
        labels.append(int(label))
        directions.append(transfer_direction(r.timeline) if label is LabelClass.TransferGrad else None)

    S = n_semesters or max([len(r.semesters) for r in kept] + [1])
    Y = max((S + 1) // 2, max([len(r.years) for r in kept] + [1]))
    specs = {t: catalog.by_temporality(t) for t in Temporality}

    categories: dict[str, list[str]] = {}
    for spec in catalog:
        if spec.kind is Kind.Categorical:
            seen = set()
            for r in kept:
                for v in _iter_values(r, spec.id, spec.temporality):
                    if isinstance(v, str):
                        seen.add(v)
            categories[spec.id] = sorted(seen)
    code = {f: {c: float(i) for i, c in enumerate(cs)} for f, cs in categories.items()}

    def num(fid, v):
        if v is None:
            return np.nan
        if isinstance(v, str):
            return code[fid].get(v, np.nan) if fid in code else np.nan
        return float(v)

    n = len(kept)
    fixed_ids = [s.id for s in specs[Temporality.Fixed]]
    sem_ids = [s.id for s in specs[Temporality.PerSemester]]
    yr_ids = [s.id for s in specs[Temporality.PerYear]]
    fixed = np.full((n, len(fixed_ids)), np.nan)
    sem = np.zeros((n, S, len(sem_ids)))
    yr = np.zeros((n, Y, len(yr_ids)))
    sem_mask = np.zeros((n, S))
    yr_mask = np.zeros((n, Y))
    for i, r in enumerate(kept):
        fixed[i] = [num(f, r.fixed.get(f)) for f in fixed_ids]
        for s in r.semesters[:S]:
            sem[i, s.index - 1] = [num(f, s.values.get(f)) for f in sem_ids]
            sem_mask[i, s.index - 1] = 1.0
        for y in r.years[:Y]:
            yr[i, y.index - 1] = [num(f, y.values.get(f)) for f in yr_ids]
            yr_mask[i, y.index - 1] = 1.0

    ds = Dataset(
        catalog=catalog,
        ids=np.array([r.student_id for r in kept], dtype=object),
        labels=np.array(labels, dtype=np.int64),
        directions=np.array(directions + [None], dtype=object)[:-1],
        has_fafsa=np.array([r.has_fafsa for r in kept], dtype=bool),
        fixed=Block.plain(fixed_ids, fixed),
        semesters=Block.plain(sem_ids, sem),
        years=Block.plain(yr_ids, yr),
        semester_mask=sem_mask,
        year_mask=yr_mask,
        categories=categories,
    )
    return BuildResult(ds, unlabeled)


def _iter_values(r: StudentRecord, fid: str, temporality: Temporality):
    if temporality is Temporality.Fixed:
        yield r.fixed.get(fid)
    elif temporality is Temporality.PerSemester:
        for s in r.semesters:
            yield s.values.get(fid)
    else:
        for y in r.years:
            yield y.values.get(fid)


def split_by_fafsa(dataset: Dataset) -> tuple[Dataset, Dataset]:
    """Partition by FAFSA status; FAFSA-sourced columns are removed from the
    no-FAFSA part."""
    fafsa = dataset.subset(np.flatnonzero(dataset.has_fafsa))
    rest = dataset.subset(np.flatnonzero(~dataset.has_fafsa))
    return fafsa, rest.drop_features(dataset.catalog.fafsa_ids())
