import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from student_success.preprocess.balance import BalanceMethod, EmptyClass, balance_classes, cap_groups, mice_regressors
from student_success.preprocess.split import TooSmall, stratified_split

from conftest import tiny_dataset


def _two_class(n_a, n_b, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.array([0] * n_a + [1] * n_b)
    x = rng.normal(size=n_a + n_b) + 3 * labels
    z = 2 * x + rng.normal(size=n_a + n_b)
    return tiny_dataset({"X": ("Continuous", x), "Z": ("Continuous", z)}, labels=labels)


@pytest.mark.parametrize("method", list(BalanceMethod))
def test_balanced_input_unchanged(method):
    ds = _two_class(100, 100)
    out, y = balance_classes(ds, method, seed=1)
    assert np.array_equal(out.fixed.values, ds.fixed.values) and np.bincount(y).tolist() == [100, 100]


def test_equal_random_keeps_originals():
    ds = _two_class(300, 100)
    out, y = balance_classes(ds, BalanceMethod.EqualRandom, seed=2)
    assert np.bincount(y).tolist() == [100, 100]
    assert set(out.ids) <= set(ds.ids)


def test_mice_oversample_counts_and_means():
    ds = _two_class(300, 100)
    out, y = balance_classes(ds, BalanceMethod.MiceOversample, seed=3)
    assert np.bincount(y).tolist() == [300, 300]
    synth = np.array(["~mice" in s for s in out.ids])
    assert synth.sum() == 200 and (y[synth] == 1).all()
    orig = ds.fixed.values[ds.labels == 1]
    sd = orig.std(axis=0)
    assert (np.abs(out.fixed.values[synth].mean(axis=0) - orig.mean(axis=0)) < 3 * sd).all()


def test_balance_is_seeded():
    ds = _two_class(50, 20)
    a, _ = balance_classes(ds, "MiceOversample", seed=4)
    b, _ = balance_classes(ds, "MiceOversample", seed=4)
    assert np.array_equal(a.fixed.values, b.fixed.values)


def test_empty_class():
    ds = _two_class(10, 0)
    with pytest.raises(EmptyClass):
        balance_classes(ds, "EqualRandom", labels=ds.labels, n_classes=2)


def test_mice_regressors_recover_linear_relation():
    rng = np.random.default_rng(0)
    a = rng.normal(size=2000)
    X = np.column_stack([a, 3 * a])
    mu, B = mice_regressors(X, ridge=1e-9)
    pred = mu[1] + (np.array([1.0, 0.0]) - mu) @ B[1]
    assert pred == pytest.approx(3.0, abs=1e-3)


def test_cap_groups():
    col = [0] * 30 + [1] * 10 + [np.nan] * 2
    ds = tiny_dataset({"G": ("Categorical", col)}, categories={"G": ["a", "b"]})
    out = cap_groups(ds, "G", max_ratio=1.5, seed=0)
    vals = out.fixed.values[:, 0]
    assert (vals == 0).sum() == 15 and (vals == 1).sum() == 10 and np.isnan(vals).sum() == 2


def test_split_1000_rows():
    labels = np.repeat([0, 1], 500)
    tr, dv, te = stratified_split(labels, seed=0)
    assert (len(tr), len(dv), len(te)) == (960, 20, 20)


def test_split_determinism():
    labels = np.random.default_rng(0).integers(0, 3, 500)
    assert all(np.array_equal(a, b) for a, b in zip(stratified_split(labels, 7), stratified_split(labels, 7)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(3, 400), min_size=1, max_size=4), st.integers(0, 1000))
def test_split_partition_and_stratification(class_sizes, seed):
    labels = np.concatenate([np.full(n, c) for c, n in enumerate(class_sizes)])
    parts = stratified_split(labels, seed)
    allrows = np.concatenate(parts)
    assert np.array_equal(np.sort(allrows), np.arange(labels.size))
    fr = (0.96, 0.02, 0.02)
    for p, f in zip(parts, fr):
        for c, n in enumerate(class_sizes):
            assert abs((labels[p] == c).sum() - n * f) <= 1.0 + 1e-9


def test_split_too_small():
    with pytest.raises(TooSmall):
        stratified_split(np.array([0, 0, 0, 1, 1]), 0)
