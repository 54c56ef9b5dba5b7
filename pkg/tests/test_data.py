import numpy as np
import pytest
from hypothesis import given, strategies as st

from dssfn.data import (
    DataError,
    Dataset,
    fit_scaling,
    load_csv,
    normalize_fit_apply,
    one_hot,
    partition_uniform,
    write_csv,
)


def test_one_hot():
    np.testing.assert_array_equal(one_hot([2, 0, 1], 3), [[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    with pytest.raises(DataError):
        one_hot([3], 3)


def test_load_with_header_and_crlf(tmp_path):
    p = tmp_path / "d.csv"
    p.write_bytes(b"a,b,label\r\n1.5,2,0\r\n-1,0.25,2\r\n")
    d = load_csv(p, header="auto")
    np.testing.assert_array_equal(d.features, [[1.5, -1.0], [2.0, 0.25]])
    np.testing.assert_array_equal(d.labels, [0, 2])
    assert d.class_count == 3
    assert load_csv(p, header=True).sample_count == 2


def test_label_column_first(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.5,0.25\n0,1.0,2.0\n")
    d = load_csv(p, label_column=0)
    np.testing.assert_array_equal(d.labels, [1, 0])
    np.testing.assert_array_equal(d.features[:, 0], [0.5, 0.25])


def test_auto_header_keeps_numeric_first_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2,0\n3,4,1\n")
    assert load_csv(p, header="auto").sample_count == 2


@pytest.mark.parametrize(
    "text,match",
    [
        ("1,2,0\n1,0\n", "expected 3 fields"),
        ("1,x,0\n", "non-numeric"),
        ("1,2,0.5\n", "not an integer"),
        ("1,2,-1\n", "negative"),
        ("1,nan,0\n", "non-finite"),
        ("", "no samples"),
        ("1\n", "at least one feature"),
    ],
)
def test_load_errors(tmp_path, text, match):
    p = tmp_path / "d.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=match):
        load_csv(p)


def test_class_count_bound(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,2,3\n")
    with pytest.raises(DataError, match="outside"):
        load_csv(p, class_count=3)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset.from_labels(rng.normal(size=(4, 9)), rng.integers(0, 3, 9), 3)
    p = tmp_path / "d.csv"
    write_csv(d, p)
    back = load_csv(p, class_count=3)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.targets, d.targets)


def test_dataset_validation():
    with pytest.raises(DataError, match="one-hot"):
        Dataset(np.zeros((2, 2)), np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(DataError, match="samples"):
        Dataset(np.zeros((2, 3)), np.eye(2))


def test_scaling_maps_train_to_unit_box():
    x = np.array([[0.0, 5.0, 10.0], [3.0, 3.0, 3.0]])
    s = fit_scaling(x)
    np.testing.assert_allclose(s.apply(x), [[-1.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    train = Dataset.from_labels(x, [0, 1, 0], 2)
    test = Dataset.from_labels(np.array([[20.0], [1.0]]), [1], 2)
    tr, te, _ = normalize_fit_apply(train, test)
    assert te.features[0, 0] == 3.0  # test data is not clipped


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**32 - 1), st.booleans())
def test_partition_is_a_balanced_cover(j, m, seed, shuffle):
    d = Dataset.from_labels(np.arange(j, dtype=float)[None, :], np.zeros(j, dtype=int), 1)
    if m > j:
        with pytest.raises(DataError):
            partition_uniform(d, m, seed)
        return
    part = partition_uniform(d, m, seed, shuffle=shuffle)
    assert max(part.sizes) - min(part.sizes) <= 1
    assert sum(part.sizes) == j
    got = np.sort(np.concatenate([s.features[0] for s in part.shards]))
    np.testing.assert_array_equal(got, np.arange(j))
    if not shuffle:
        np.testing.assert_array_equal(np.concatenate(part.indices), np.arange(j))


def test_partition_is_seeded():
    d = Dataset.from_labels(np.arange(30, dtype=float)[None, :], np.zeros(30, dtype=int), 1)
    a = partition_uniform(d, 4, 7)
    b = partition_uniform(d, 4, 7)
    c = partition_uniform(d, 4, 8)
    assert all(np.array_equal(x, y) for x, y in zip(a.indices, b.indices))
    assert not all(np.array_equal(x, y) for x, y in zip(a.indices, c.indices))
