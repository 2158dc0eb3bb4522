import json

import numpy as np
import pytest

from student_success.preprocess.encode import NotFitted, Transform, encode_and_scale

from conftest import tiny_dataset


def test_one_hot_married():
    ds = tiny_dataset({"MS": ("Categorical", [0, 1, 0])}, categories={"MS": ["Married", "Single"]})
    t, (out,) = encode_and_scale(ds)
    assert out.fixed.columns == ["MS=Married", "MS=Single"]
    assert out.fixed.values[0].tolist() == [1, 0]


def test_unseen_category_is_all_zero():
    train = tiny_dataset({"MS": ("Categorical", [0, 0])}, categories={"MS": ["Married", "Single"]})
    test = tiny_dataset({"MS": ("Categorical", [1, 0])}, categories={"MS": ["Married", "Single"]})
    _, (_, out) = encode_and_scale(train, test)
    assert out.fixed.values.tolist() == [[0.0], [1.0]]


def test_constant_column_is_zero():
    t, (out,) = encode_and_scale(tiny_dataset({"C": ("Continuous", [7, 7, 7])}))
    assert (out.fixed.values == 0).all()
    p = t.params["fixed"]["C"]
    assert (p.iqr, p.norm) == (1.0, 1.0)


def test_hand_arithmetic_scale():
    _, (out,) = encode_and_scale(tiny_dataset({"X": ("Continuous", [1, 2, 3, 4, 5])}))
    expected = np.array([-1, -0.5, 0, 0.5, 1]) / np.sqrt(2.5)
    np.testing.assert_allclose(out.fixed.values[:, 0], expected, rtol=0, atol=1e-15)
    assert np.linalg.norm(out.fixed.values[:, 0]) == pytest.approx(1.0)


def test_binary_passes_through():
    _, (out,) = encode_and_scale(tiny_dataset({"B": ("Binary", [0, 1, 1])}))
    assert out.fixed.values[:, 0].tolist() == [0, 1, 1]


def test_test_rows_never_change_parameters():
    rng = np.random.default_rng(3)
    train = tiny_dataset({"X": ("Continuous", rng.normal(size=50))})
    test = tiny_dataset({"X": ("Continuous", rng.normal(size=5))})
    t1, _ = encode_and_scale(train, test)
    test.fixed.values[0, 0] = 1e9
    t2, _ = encode_and_scale(train, test)
    assert t1.to_json() == t2.to_json()


def test_json_round_trip_replays_exactly():
    rng = np.random.default_rng(1)
    ds = tiny_dataset({"X": ("Continuous", rng.normal(size=20)), "M": ("Categorical", rng.integers(0, 3, 20))},
                      categories={"M": ["a", "b", "c"]})
    t = Transform.fit(ds)
    again = Transform.from_json(t.to_json())
    assert np.array_equal(t.apply(ds).fixed.values, again.apply(ds).fixed.values)
    assert json.loads(t.to_json())["fixed"]["M"]["categories"] == ["a", "b", "c"]


def test_unfitted_transform():
    with pytest.raises(NotFitted):
        Transform().apply(tiny_dataset({"X": ("Continuous", [1, 2])}))
