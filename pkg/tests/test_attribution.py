import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import tiny_dataset
from student_success.attribution import (
    Method, Reference, contribution_ratios, gradinput_impacts, occlusion_impacts, permutation_importance,
    recall_drops, student_attribution, visible_features,
)
from student_success.model import stage_inputs
from student_success.nn import Inputs, MultiBranchNet
from student_success.nn.network import StageArchitecture
from student_success.staging import Stage


def linear_net(weights, bias=None):
    """Logits = x @ weights + bias, with nothing in between."""
    weights = np.asarray(weights, dtype=float)
    arch = StageArchitecture(dense_units=(), head=(), n_classes=weights.shape[1])
    net = MultiBranchNet(arch, weights.shape[0])
    net.set_state({"head.out.W": weights, "head.out.b": np.zeros(weights.shape[1]) if bias is None else bias})
    return net


def linear_fixture(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 0] <= 0).astype(int)
    ds = tiny_dataset({"a": ("Continuous", X[:, 0]), "b": ("Continuous", X[:, 1]), "c": ("Continuous", X[:, 2])}, y)
    net = linear_net([[3.0, -3.0], [0.0, 0.0], [0.5, -0.5]])
    return ds, net


def test_zero_weight_feature_is_inert():
    ds, net = linear_fixture()
    imp = {e.feature: e.score for e in permutation_importance(net, ds, ds.labels, Stage.Stage1, repeats=3)}
    assert imp["b"] == 0.0 and imp["a"] > imp["c"]
    ref = Reference.from_training(ds)
    feats = visible_features(ds, Stage.Stage1)
    x = stage_inputs(ds, Stage.Stage1)
    for i in range(5):
        _, occ = occlusion_impacts(net, x.take(slice(i, i + 1)), feats, ref)
        assert occ[1] == 0.0


def test_occlusion_matches_brute_force():
    ds, net = linear_fixture(50, seed=3)
    ref = Reference.from_training(ds)
    feats = visible_features(ds, Stage.Stage1)
    x = stage_inputs(ds, Stage.Stage1).take(slice(7, 8))
    target, occ = occlusion_impacts(net, x, feats, ref)
    p = net.predict_proba(x)[0, target]
    for k in range(3):
        xo = x.fixed.copy()
        xo[0, k] = np.median(ds.fixed.values[:, k])
        assert occ[k] == pytest.approx(p - net.predict_proba(Inputs(xo))[0, target], abs=1e-12)


def test_gradinput_on_linear_net_is_weight_times_value():
    ds, net = linear_fixture(20, seed=4)
    feats = visible_features(ds, Stage.Stage1)
    x = stage_inputs(ds, Stage.Stage1).take(slice(2, 3))
    W = net.parameters()["head.out.W"]
    for target in (0, 1):
        _, g = gradinput_impacts(net, x, feats, target)
        np.testing.assert_allclose(g, W[:, target] * x.fixed[0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(-1, 1), min_size=3, max_size=3), min_size=1, max_size=6))
def test_ratios_sum_to_one_or_zero(rows):
    r = contribution_ratios(np.array(rows))
    assert (r >= 0).all()
    for s in r.sum(axis=1):
        assert s == pytest.approx(1.0) or s == 0.0


def test_symmetric_drops_give_uniform_ratios():
    np.testing.assert_allclose(contribution_ratios(np.full((2, 4), 0.3)), 0.25)


def test_one_hot_group_is_occluded_as_a_unit():
    ds, _ = linear_fixture(10)
    ds.fixed.columns = ["a", "g=x", "g=y"]
    ds.fixed.groups = {"a": [0], "g": [1, 2]}
    ds.fixed.values[:, 1:] = np.eye(2)[np.arange(10) % 2]
    net = linear_net([[1.0, 0.0], [0.0, 2.0], [0.0, 2.0]])
    feats = visible_features(ds, Stage.Stage1)
    assert [f for _, f, _ in feats] == ["a", "g"] and feats[1][2] == [1, 2]
    ref = Reference.from_training(ds)
    assert (ref.fixed[1:] == 0).all()
    x = stage_inputs(ds, Stage.Stage1).take(slice(0, 1))
    _, occ = occlusion_impacts(net, x, feats, ref, target=1)
    xo = x.fixed.copy()
    xo[0, 1:] = 0.0
    assert occ[1] == pytest.approx(net.predict_proba(x)[0, 1] - net.predict_proba(Inputs(xo))[0, 1])


def test_attribution_is_deterministic():
    ds, net = linear_fixture(80, seed=9)
    a = permutation_importance(net, ds, ds.labels, Stage.Stage1, repeats=2, seed=4)
    b = permutation_importance(net, ds, ds.labels, Stage.Stage1, repeats=2, seed=4)
    assert a == b
    d1 = recall_drops(net, ds, ds.labels, Stage.Stage1, ["a", "c"], 2, repeats=2, seed=1)
    d2 = recall_drops(net, ds, ds.labels, Stage.Stage1, ["a", "c"], 2, repeats=2, seed=1)
    assert (d1 == d2).all()


def test_student_attribution_ranks_by_magnitude():
    ds, net = linear_fixture(40, seed=2)
    for method in Method:
        top = student_attribution(net, ds, 0, Stage.Stage1, method, top_k=2)
        assert len(top) == 2 and [e.rank for e in top] == [1, 2]
        assert abs(top[0].score) >= abs(top[1].score) and top[0].scope == ds.ids[0]


def test_time_block_permutation_respects_padding(small_scenario):
    from student_success.attribution import _permute

    x = stage_inputs(small_scenario.test, Stage.Stage3)
    cols = [0]
    out = _permute(x, "semesters", cols, np.random.default_rng(0))
    assert (out.semesters[x.semester_mask == 0] == 0).all()
    np.testing.assert_array_equal(out.fixed, x.fixed)
