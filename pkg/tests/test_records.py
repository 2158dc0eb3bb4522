import datetime as dt
import io

import pytest

from student_success.records import (
    Exclusion, RecordError, check_raw, exclude_ineligible, iter_jsonl, record_from_dict, record_to_dict,
    validate_record, write_jsonl, EnrollmentTimeline,
)
from student_success.synth import GenConfig, generate_cohort

from conftest import make_record


def test_exclusion_partition_simple():
    normal = make_record("a")
    military = make_record("b").replace(excluded=Exclusion.Military)
    assert exclude_ineligible([normal, military]) == ([normal], [military])
    assert exclude_ineligible([]) == ([], [])


def test_exclusion_counts_on_batch():
    recs = [make_record(f"s{i}") for i in range(100)]
    flagged = {3, 10, 22, 40, 41, 77, 99}
    recs = [r.replace(excluded=Exclusion.Deceased if i % 2 else Exclusion.Military) if i in flagged else r
            for i, r in enumerate(recs)]
    kept, dropped = exclude_ineligible(recs)
    assert (len(kept), len(dropped)) == (93, 7)
    assert {r.student_id for r in kept} | {r.student_id for r in dropped} == {r.student_id for r in recs}
    assert all(r.excluded is None for r in kept)
    assert [r.student_id for r in kept] == [r.student_id for r in recs if r.excluded is None]


def test_clean_record_validates(catalog):
    r = make_record(fixed={"HS-GPA": 3.2, "GENDER": "F"}, semesters=[{"GPA": 3.0}])
    assert not validate_record(r, catalog)


def test_impossible_age_flagged(catalog):
    report = validate_record(make_record(fixed={"AGE": 205.0}), catalog)
    assert len(report) == 1
    assert report.of_kind("impossible-value")[0].feature == "AGE"


def test_temporality_mismatch_flagged(catalog):
    report = validate_record(make_record(fixed={"GPA": 3.0}), catalog)
    assert [f.kind for f in report.findings] == ["temporality-mismatch"]


def test_unknown_feature_flagged(catalog):
    assert validate_record(make_record(fixed={"NOPE": 1.0}), catalog).of_kind("unknown-feature")


def test_generated_records_validate(catalog):
    for r in generate_cohort(GenConfig(n_students=150, seed=4), catalog):
        assert not validate_record(r, catalog), r.student_id


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), "", [1]])
def test_raw_value_rules(bad):
    with pytest.raises(RecordError):
        check_raw(bad)


def test_timeline_invariants():
    d = dt.date(2015, 1, 1)
    with pytest.raises(RecordError):
        EnrollmentTimeline(d, d - dt.timedelta(days=1))
    with pytest.raises(RecordError):
        EnrollmentTimeline(d, d, reappearance_date=d)
    with pytest.raises(RecordError):
        EnrollmentTimeline(d, d, destination_graduated=True)


def test_slice_indices_must_increase():
    r = make_record(semesters=[{}, {}])
    with pytest.raises(RecordError):
        r.replace(semesters=(r.semesters[1], r.semesters[0]))


def test_jsonl_round_trip():
    recs = generate_cohort(GenConfig(n_students=20, seed=2))
    buf = io.StringIO()
    write_jsonl(recs, buf, header="test")
    buf.seek(0)
    assert list(iter_jsonl(buf)) == recs
    assert all(record_from_dict(record_to_dict(r)) == r for r in recs)


def test_malformed_jsonl_line():
    with pytest.raises(RecordError, match="line 2"):
        list(iter_jsonl(io.StringIO("# h\n{not json}\n")))
