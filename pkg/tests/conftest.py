import datetime as dt

import numpy as np
import pytest

from student_success.catalog import default_catalog
from student_success.records import EnrollmentTimeline, SemesterSlice, StudentRecord, YearSlice


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


def make_record(sid="S1", fixed=None, semesters=(), years=(), **timeline):
    t = dict(first_enrollment=dt.date(2012, 8, 20), last_enrollment=dt.date(2016, 5, 10),
             degree_awarded_at_origin=True)
    t.update(timeline)
    return StudentRecord(
        student_id=sid,
        fixed=dict(fixed or {}),
        semesters=tuple(SemesterSlice(i + 1, dict(v)) for i, v in enumerate(semesters)),
        years=tuple(YearSlice(i + 1, dict(v)) for i, v in enumerate(years)),
        timeline=EnrollmentTimeline(**t),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_dataset(columns, labels=None, categories=None, ranges=None):
    """Fixed-only dataset.  ``columns`` maps id -> (kind, values)."""
    from student_success.catalog import parse_catalog
    from student_success.preprocess.dataset import Block, Dataset

    ranges = ranges or {}
    lines = ["id,family,temporality,kind,engineered,min,max"]
    for fid, (kind, _) in columns.items():
        lo, hi = ranges.get(fid, ("", ""))
        lines.append(f"{fid},Academic,Fixed,{kind},false,{lo},{hi}")
    cat = parse_catalog("\n".join(lines) + "\n")
    values = np.column_stack([np.asarray(v, dtype=float) for _, v in columns.values()])
    n = values.shape[0]
    return Dataset(
        catalog=cat,
        ids=np.array([f"r{i}" for i in range(n)], dtype=object),
        labels=np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64),
        directions=np.array([None] * n, dtype=object),
        has_fafsa=np.ones(n, dtype=bool),
        fixed=Block.plain(list(columns), values),
        semesters=Block.plain([], np.zeros((n, 1, 0))),
        years=Block.plain([], np.zeros((n, 1, 0))),
        semester_mask=np.zeros((n, 1)),
        year_mask=np.zeros((n, 1)),
        categories=dict(categories or {}),
    )


def knn_oracle(matrix, target, predictors, k):
    """Exhaustive nearest-neighbour mean, written independently of the library."""
    import math

    m = np.asarray(matrix, dtype=float)
    out = m[:, target].copy()
    stats = []
    for j in predictors:
        obs = [v for v in m[:, j] if not math.isnan(v)]
        mu = math.fsum(obs) / len(obs) if obs else 0.0
        sd = math.sqrt(math.fsum((v - mu) ** 2 for v in obs) / len(obs)) if obs else 1.0
        stats.append((j, mu, sd if sd > 0 else 1.0))
    for i in range(m.shape[0]):
        if not math.isnan(m[i, target]):
            continue
        use = [(j, mu, sd) for j, mu, sd in stats if not math.isnan(m[i, j])]
        cands = []
        for r in range(m.shape[0]):
            if math.isnan(m[r, target]) or any(math.isnan(m[r, j]) for j, _, _ in use):
                continue
            d = math.fsum(((m[r, j] - mu) / sd - (m[i, j] - mu) / sd) ** 2 for j, mu, sd in use)
            cands.append((d, r))
        cands.sort()
        nb = cands[:k]
        out[i] = math.fsum(m[r, target] for _, r in nb) / len(nb)
    return out


@pytest.fixture(scope="session")
def small_cohort():
    from student_success.synth import GenConfig, generate_cohort, inject_anomalies

    cfg = GenConfig(n_students=700, seed=5, outlier_rate=0.003)
    return inject_anomalies(generate_cohort(cfg), cfg)


@pytest.fixture(scope="session")
def small_prepared(small_cohort, catalog):
    from student_success.preprocess import PrepConfig, prepare

    return prepare(small_cohort, PrepConfig(seed=5), catalog)


@pytest.fixture(scope="session")
def small_scenario(small_prepared):
    from student_success.preprocess import scenario_splits
    from student_success.staging import Scenario

    return scenario_splits(small_prepared.dataset, Scenario.SIII, seed=0, fractions=(0.7, 0.15, 0.15))
