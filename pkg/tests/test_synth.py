import io

import numpy as np
import pytest

from student_success.catalog import Family
from student_success.records import validate_record, write_jsonl
from student_success.staging import LabelClass, assign_label
from student_success.synth import ConfigError, GenConfig, generate_cohort, inject_anomalies, simulate_cohort


def _jsonl(records):
    buf = io.StringIO()
    write_jsonl(records, buf)
    return buf.getvalue()


def test_same_seed_byte_identical():
    cfg = GenConfig(n_students=200, seed=9)
    assert _jsonl(generate_cohort(cfg)) == _jsonl(generate_cohort(cfg))
    assert _jsonl(generate_cohort(cfg)) != _jsonl(generate_cohort(cfg.with_(seed=10)))


def test_exact_count_and_unique_ids():
    recs = generate_cohort(GenConfig(n_students=321, seed=1))
    assert len(recs) == 321 and len({r.student_id for r in recs}) == 321


@pytest.mark.slow
def test_fafsa_rate_matches_default():
    recs = generate_cohort(GenConfig(n_students=10000, seed=5))
    assert abs(np.mean([r.has_fafsa for r in recs]) - 0.7055) < 0.02


def test_structural_fafsa_missingness(catalog):
    fafsa_ids = catalog.fafsa_ids()
    recs = generate_cohort(GenConfig(n_students=300, seed=3), catalog)
    for r in recs:
        if r.has_fafsa:
            continue
        assert all(r.fixed.get(f) is None for f in fafsa_ids if f in r.fixed)
        for y in r.years:
            assert all(y.values.get(f) is None for f in fafsa_ids if f in y.values)


def test_intended_labels_match_label_rule():
    cohort = simulate_cohort(GenConfig(n_students=2000, seed=8, boundary_rate=0.3))
    for r, intended in zip(cohort.records, cohort.intended):
        assert assign_label(r.timeline, cohort.model.config.horizon) == intended


@pytest.mark.slow
def test_planted_quartile_gap_matches_monte_carlo():
    cfg = GenConfig(n_students=10000, seed=21, planted_effects=(("HS-GPA", 2.0, "Graduate"),),
                    latent_effects={c: (0.0, 0.0, 0.0) for c in LabelClass.__members__},
                    excluded_rate=0.0, indeterminate_rate=0.0)
    cohort = simulate_cohort(cfg)
    z = cohort.planted_z["HS-GPA"]
    grad = np.array([lab is LabelClass.Graduate for lab in cohort.intended])
    lo, hi = np.quantile(z, [0.25, 0.75])
    empirical = grad[z >= hi].mean() - grad[z <= lo].mean()

    rng = np.random.default_rng(99)
    lat, zz = cohort.model.sample_profiles(400000, rng)
    p = cohort.model.probabilities(lat, zz)[:, LabelClass.Graduate]
    v = zz["HS-GPA"]
    qlo, qhi = np.quantile(v, [0.25, 0.75])
    oracle = p[v >= qhi].mean() - p[v <= qlo].mean()
    assert abs(empirical - oracle) < 0.03


def test_zero_outlier_rate_is_identity():
    recs = generate_cohort(GenConfig(n_students=50, seed=2))
    cfg = GenConfig(n_students=50, seed=2, outlier_rate=0.0, conflict_rate=0.0)
    assert inject_anomalies(recs, cfg) == recs


def test_injected_count_within_binomial_interval(catalog):
    recs = generate_cohort(GenConfig(n_students=400, seed=6), catalog)
    cfg = GenConfig(n_students=400, seed=6, outlier_rate=0.01, conflict_rate=0.0)
    log = []
    inject_anomalies(recs, cfg, catalog, log=log)
    eligible = {s.id for s in catalog if s.possible_range is not None and s.numeric and s.kind.value in
                ("Continuous", "Discrete")}
    n = 0
    for r in recs:
        for values in [r.fixed] + [s.values for s in r.semesters] + [y.values for y in r.years]:
            n += sum(1 for f, v in values.items() if f in eligible and v is not None and not isinstance(v, str))
    p = 0.01
    half = 2.576 * np.sqrt(n * p * (1 - p))
    assert n * p - half <= len(log) <= n * p + half


def test_planted_age_is_flagged(catalog):
    recs = generate_cohort(GenConfig(n_students=3, seed=1), catalog)
    r = recs[0].replace(fixed={**recs[0].fixed, "AGE": 205.0})
    assert validate_record(r, catalog).of_kind("impossible-value")


@pytest.mark.parametrize("changes", [dict(n_students=0), dict(fafsa_rate=1.5),
                                     dict(label_mix={"Graduate": 1.0}),
                                     dict(planted_effects=(("NOT-A-FEATURE", 1.0),)),
                                     dict(missing_rate={"Astrology": 0.1})])
def test_config_errors(changes):
    with pytest.raises(ConfigError):
        GenConfig(**changes)


def test_missing_rate_families_known():
    assert set(GenConfig().missing_rate) <= set(Family.__members__)
