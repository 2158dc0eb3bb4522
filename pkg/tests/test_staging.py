import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from student_success.records import EnrollmentTimeline
from student_success.staging import (
    Direction, LabelClass, MissingDirection, Scenario, Stage, StagedSample, Unlabeled, assign_label, collapse,
    collapse_array, collapse_matrix, stage_view, transfer_direction,
)

LEFT = dt.date(2016, 5, 1)
HORIZON = dt.date(2019, 12, 31)


def tl(**kw):
    return EnrollmentTimeline(dt.date(2013, 8, 20), kw.pop("last", LEFT), **kw)


def test_degree_means_graduate():
    assert assign_label(tl(degree_awarded_at_origin=True), HORIZON) is LabelClass.Graduate


def test_reappeared_and_graduated_is_transfer_grad():
    t = tl(reappearance_date=LEFT + dt.timedelta(days=200), destination_graduated=True, destination_program_level=2)
    assert assign_label(t, HORIZON) is LabelClass.TransferGrad


def test_reappeared_is_transfer():
    assert assign_label(tl(reappearance_date=LEFT + dt.timedelta(days=30)), HORIZON) is LabelClass.Transfer


def test_recent_leaver_is_indeterminate():
    assert assign_label(tl(last=dt.date(2018, 6, 1)), HORIZON) is Unlabeled.Indeterminate


@pytest.mark.parametrize("days,expected", [(729, Unlabeled.Indeterminate), (730, LabelClass.Dropout),
                                           (731, LabelClass.Dropout)])
def test_dropout_boundary(days, expected):
    assert assign_label(tl(last=HORIZON - dt.timedelta(days=days)), HORIZON) is expected


@pytest.mark.parametrize("days,expected", [(730, LabelClass.Transfer), (731, LabelClass.Dropout)])
def test_reappearance_boundary(days, expected):
    assert assign_label(tl(reappearance_date=LEFT + dt.timedelta(days=days)), HORIZON) is expected


def test_direction_levels():
    up = tl(reappearance_date=LEFT + dt.timedelta(days=10), destination_graduated=True, destination_program_level=2)
    down = tl(reappearance_date=LEFT + dt.timedelta(days=10), destination_graduated=True, destination_program_level=1)
    assert transfer_direction(up) is Direction.Same
    assert transfer_direction(down) is Direction.Down


def test_collapse_examples():
    assert Scenario.SI.class_names[collapse(LabelClass.TransferGrad, None, Scenario.SI)] == "Transfer"
    assert collapse(LabelClass.Graduate, None, Scenario.S0) == int(LabelClass.Graduate)
    assert collapse(LabelClass.TransferGrad, Direction.Down, Scenario.SV) == 1
    assert collapse(LabelClass.TransferGrad, Direction.Same, Scenario.SV) == 0
    with pytest.raises(MissingDirection):
        collapse(LabelClass.TransferGrad, None, Scenario.SV)


def test_class_counts():
    assert [s.class_count for s in Scenario] == [4, 3, 3, 2, 2, 2]


@pytest.mark.parametrize("scenario", list(Scenario))
def test_collapse_total_and_surjective(scenario):
    seen = {collapse(l, d, scenario) for l in LabelClass for d in Direction}
    assert seen == set(range(scenario.class_count))


@given(st.lists(st.tuples(st.sampled_from(list(LabelClass)), st.sampled_from(list(LabelClass))), min_size=1,
                max_size=60),
       st.sampled_from([s for s in Scenario if s is not Scenario.SV]))
def test_collapse_matrix_matches_label_collapse(pairs, scenario):
    cm = np.zeros((4, 4), dtype=int)
    for t, p in pairs:
        cm[t, p] += 1
    direct = np.zeros((scenario.class_count,) * 2, dtype=int)
    for t, p in pairs:
        direct[collapse(t, None, scenario), collapse(p, None, scenario)] += 1
    out = collapse_matrix(cm, scenario)
    assert (out == direct).all() and out.sum() == len(pairs)


def test_collapse_array():
    labels = [LabelClass.Graduate, LabelClass.Dropout, LabelClass.TransferGrad]
    dirs = [None, None, Direction.Up]
    assert collapse_array(labels, dirs, Scenario.SV).tolist() == [0, 1, 0]


def test_stage_slices():
    assert [(s.semester_slices, s.year_slices) for s in Stage] == [(0, 0), (2, 0), (4, 2), (6, 3)]
    assert Stage.parse("stage3") is Stage.Stage3 and Scenario.parse("3") is Scenario.SIII
    assert Scenario.parse("SIII") is Scenario.SIII and Scenario.parse(0) is Scenario.S0


def _sample(n_sem, n_year, width=3):
    sem = np.arange(8 * width, dtype=float).reshape(8, width) + 1
    yr = np.arange(4 * width, dtype=float).reshape(4, width) + 1
    sm = (np.arange(8) < n_sem).astype(float)
    ym = (np.arange(4) < n_year).astype(float)
    return StagedSample(np.ones(5), sem * sm[:, None], sm, yr * ym[:, None], ym)


def test_stage1_has_empty_time_blocks():
    v = stage_view(_sample(8, 4), Stage.Stage1)
    assert v.semesters.shape == (0, 3) and v.years.shape == (0, 3)
    assert (v.fixed == 1).all()


def test_stage4_truncates_to_six_semesters():
    v = stage_view(_sample(8, 4), Stage.Stage4)
    assert v.semesters.shape[0] == 6 and v.semester_mask.tolist() == [1] * 6
    assert v.years.shape[0] == 3


def test_stage3_pads_short_record():
    v = stage_view(_sample(3, 2), Stage.Stage3)
    assert v.semesters.shape[0] == 4
    assert v.semester_mask.tolist() == [1, 1, 1, 0]
    assert (v.semesters[3] == 0).all()


def test_stage_views_are_prefixes():
    s = _sample(7, 3)
    for a, b in zip(list(Stage)[:-1], list(Stage)[1:]):
        va, vb = stage_view(s, a), stage_view(s, b)
        assert np.array_equal(vb.semesters[: len(va.semesters)], va.semesters)
        assert np.array_equal(vb.years[: len(va.years)], va.years)
