import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lattkm.data import Dataset, Standardizer, cyclic_shift, load_csv, split, write_csv
from lattkm.exceptions import DataError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_toy_file(tmp_path):
    ds = load_csv(write(tmp_path, "x1,x2,y\n1,2,3\n4,5,6\n7,8,9.5\n"))
    np.testing.assert_array_equal(ds.X, [[1, 2], [4, 5], [7, 8]])
    np.testing.assert_array_equal(ds.y, [3, 6, 9.5])
    assert ds.columns == ("x1", "x2")


def test_nan_cell_names_row_and_column(tmp_path):
    p = write(tmp_path, "x1,x2,y\n1,2,3\nNaN,5,6\n")
    with pytest.raises(DataError, match=r"row 2, column 'x1'"):
        load_csv(p)


def test_non_numeric_and_missing(tmp_path):
    with pytest.raises(DataError, match=r"'abc' at row 1, column 'y'"):
        load_csv(write(tmp_path, "x1,y\n1,abc\n2,3\n"))
    with pytest.raises(DataError, match=r"row 2, column 'x1'"):
        load_csv(write(tmp_path, "x1,y\n1,2\n,3\n"))


def test_delimiter_and_target(tmp_path):
    ds = load_csv(write(tmp_path, "t;a;b\n1;2;3\n4;5;6\n"), target_column="t", delimiter=";")
    np.testing.assert_array_equal(ds.y, [1, 4])
    np.testing.assert_array_equal(ds.X, [[2, 3], [5, 6]])
    with pytest.raises(DataError, match="target column"):
        load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), target_column="z")


def test_roundtrip(tmp_path, rng):
    ds = Dataset(rng.standard_normal((5, 2)), rng.standard_normal(5))
    write_csv(tmp_path / "r.csv", ds)
    back = load_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)


@pytest.mark.parametrize("f, sizes", [(0.1, (9, 1)), (0.2, (8, 2))])
def test_split_sizes(f, sizes):
    ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))
    tr, te = split(ds, f, seed=3)
    assert (tr.n_samples, te.n_samples) == sizes
    assert sorted(np.concatenate([tr.indices, te.indices]).tolist()) == list(range(10))
    tr2, te2 = split(ds, f, seed=3)
    np.testing.assert_array_equal(te.indices, te2.indices)


def test_split_rejects_bad_fraction():
    ds = Dataset(np.arange(4.0).reshape(2, 2), np.arange(2.0))
    for f in (0.0, 1.0):
        with pytest.raises(ValueError):
            split(ds, f)


def test_cyclic_shift():
    ds = Dataset(np.array([[1.0, 2.0, 3.0]]), np.zeros(1), columns=("a", "b", "c"))
    assert cyclic_shift(ds, 1).columns == ("c", "a", "b")
    np.testing.assert_array_equal(cyclic_shift(ds, 1).X, [[3, 1, 2]])
    np.testing.assert_array_equal(cyclic_shift(ds, 0).X, ds.X)
    with pytest.raises(ValueError):
        cyclic_shift(ds, 3)


@given(st.integers(2, 6), st.data())
def test_shift_group_property(D, data):
    k = data.draw(st.integers(0, D - 1))
    X = np.arange(D, dtype=float)[None, :]
    ds = Dataset(X, np.zeros(1))
    back = cyclic_shift(cyclic_shift(ds, k), (D - k) % D)
    np.testing.assert_array_equal(back.X, X)
    np.testing.assert_array_equal(cyclic_shift(cyclic_shift(ds, D - 1), 1).X, X)


def test_standardizer(rng):
    X, y = rng.normal(3, 2, (50, 2)), rng.normal(-1, 4, 50)
    s = Standardizer().fit(X, y)
    Z = s.transform(X)
    np.testing.assert_allclose(Z.mean(0), 0, atol=1e-12)
    np.testing.assert_allclose(Z.std(0), 1, atol=1e-12)
    np.testing.assert_allclose(s.inverse_mean(s.transform_y(y)), y, atol=1e-12)
    assert s.inverse_var(np.array([1.0]))[0] == pytest.approx(y.std() ** 2)
    scale_only = Standardizer(center_target=False).fit(X, y)
    assert scale_only.y_mean_ == 0.0
    with pytest.raises(DataError):
        Standardizer().fit(X, np.ones(50))
    with pytest.raises(DataError):
        Standardizer().fit(np.ones((5, 1)), np.arange(5.0))


def test_dataset_rejects_nonfinite():
    with pytest.raises(DataError):
        Dataset(np.array([[np.inf]]), np.zeros(1))
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), np.zeros(3))
