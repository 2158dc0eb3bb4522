"""Collapsing conflicting declarations."""

from __future__ import annotations

import zlib
from collections import Counter

import numpy as np

from ..catalog import FeatureCatalog, Temporality, default_catalog
from ..records import StudentRecord, YearSlice


def _tie_rng(seed: int, student_id: str, fid: str) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(f"{student_id}\x00{fid}".encode())])


def most_frequent(values, seed: int, student_id: str = "", fid: str = ""):
    """Mode of ``values``; ties go to a seeded uniform pick among the tied
    values (sorted first so the result does not depend on input order)."""
    counts = Counter(values)
    top = max(counts.values())
    tied = sorted(v for v, c in counts.items() if c == top)
    if len(tied) == 1:
        return tied[0]
    return tied[int(_tie_rng(seed, student_id, fid).integers(len(tied)))]


def resolve_inconsistencies(record: StudentRecord, seed: int = 0,
                            catalog: FeatureCatalog | None = None) -> StudentRecord:
    """Fixed features take the most frequent declaration.  Features the
    catalog lists as per-year get their declarations spread over the year
    slices instead (declaration ``i`` fills year ``i + 1`` where empty)."""
    if not record.declarations:
        return record
    catalog = catalog or default_catalog()
    fixed = dict(record.fixed)
    years = [dict(y.values) for y in record.years]
    for fid, forms in record.declarations.items():
        if not forms:
            continue
        spec = catalog.get(fid)
        if spec is not None and spec.temporality is Temporality.PerYear:
            for i, value in enumerate(forms[: len(years)]):
                if years[i].get(fid) is None:
                    years[i][fid] = value
            continue
        fixed[fid] = most_frequent(forms, seed, record.student_id, fid)
    return record.replace(
        fixed=fixed,
        years=tuple(YearSlice(y.index, v) for y, v in zip(record.years, years)),
        declarations={},
    )
