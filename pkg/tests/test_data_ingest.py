import numpy as np
import pytest

from berhu.core import Dataset, ParameterError
from berhu.data_ingest import (
    DataFileNotFoundError,
    EmptyDataError,
    MissingColumnError,
    TableParseError,
    TabularSource,
    load_table,
    read_table,
    resampling_study,
)
from berhu.methods import MethodSettings


def _write(tmp_path, text, name="t.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_whitespace_with_row_labels(tmp_path):
    path = _write(tmp_path, "a b y\n1 1 2 3\n2 4 5 6\n3 7 8 10\n")
    x, y, names = read_table(TabularSource(path, "y", ("a", "b")))
    np.testing.assert_array_equal(x, [[1, 2], [4, 5], [7, 8]])
    np.testing.assert_array_equal(y, [3, 6, 10])
    assert names == ("a", "b")


def test_csv_with_unnamed_label_column(tmp_path):
    path = _write(tmp_path, '"","a","y","junk"\n"r1",1,2,foo\n"r2",3,5,bar\n', "t.csv")
    x, y, _ = read_table(TabularSource(path, "y", ("a",)))
    np.testing.assert_array_equal(x[:, 0], [1, 3])
    np.testing.assert_array_equal(y, [2, 5])


def test_default_predictors_are_all_other_columns(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,3\n2,1,4\n0,0,1\n")
    data = load_table(TabularSource(path, "y", None))
    assert data.names == ("a", "b")
    np.testing.assert_allclose(data.x.mean(axis=0), 0)


def test_missing_column(tmp_path):
    path = _write(tmp_path, "a b\n1 2\n")
    with pytest.raises(MissingColumnError) as err:
        read_table(TabularSource(path, "lpsa", ("a",)))
    assert err.value.column == "lpsa"


def test_non_numeric_cell(tmp_path):
    path = _write(tmp_path, "a y\n1 2\nx 3\n")
    with pytest.raises(TableParseError) as err:
        read_table(TabularSource(path, "y", ("a",)))
    assert err.value.row == 3 and err.value.column == "a"


def test_missing_value(tmp_path):
    path = _write(tmp_path, "a y\n1 2\nNA 3\n")
    with pytest.raises(TableParseError):
        read_table(TabularSource(path, "y", ("a",)))


def test_ragged_row(tmp_path):
    path = _write(tmp_path, "a y\n1 2 3 4\n")
    with pytest.raises(TableParseError):
        read_table(TabularSource(path, "y", ("a",)))


def test_empty_and_missing_file(tmp_path):
    with pytest.raises(EmptyDataError):
        read_table(TabularSource(_write(tmp_path, "\n\n"), "y", ("a",)))
    with pytest.raises(EmptyDataError):
        read_table(TabularSource(_write(tmp_path, "a y\n", "h.txt"), "y", ("a",)))
    with pytest.raises(DataFileNotFoundError):
        read_table(TabularSource(str(tmp_path / "nope.txt"), "y", ("a",)))


def test_source_validation():
    with pytest.raises(ParameterError):
        TabularSource("f", "y", ("y", "a"))
    with pytest.raises(ParameterError):
        TabularSource("f", "y", ("a", "a"))


def _synthetic(rng, n=40):
    x = rng.standard_normal((n, 3))
    y = 0.5 + x @ np.array([1.0, 0.0, -2.0]) + 0.3 * rng.standard_normal(n)
    return Dataset(x - x.mean(axis=0), y, ("u", "v", "w"))


def test_resampling_deterministic(rng):
    data = _synthetic(rng)
    settings = MethodSettings(grid_points=5)
    a = resampling_study(data, ["OLS", "ad-lasso"], splits=3, train_size=28, seed=9,
                         settings=settings).as_dict()
    b = resampling_study(data, ["OLS", "ad-lasso"], splits=3, train_size=28, seed=9,
                         settings=settings).as_dict()
    assert a == b
    assert a["test_size"] == 12
    assert a["methods"]["OLS"]["selection_counts"] == {"u": 3, "v": 3, "w": 3}
    assert a["methods"]["ad-lasso"]["test_mse"]["mean"] > 0


def test_resampling_rejects_bad_sizes(rng):
    data = _synthetic(rng)
    with pytest.raises(ParameterError):
        resampling_study(data, ["OLS"], splits=1, train_size=40)
    with pytest.raises(ParameterError):
        resampling_study(data, ["OLS"], splits=0)
