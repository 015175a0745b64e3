import numpy as np
import pandas as pd
import pytest

from core.dataset import (
    SYNTHETIC_MEANS,
    SYNTHETIC_ROTATION,
    Dataset,
    SplitSpec,
    build_group_index,
    cutting,
    describe_groups,
    gen_synthetic,
    load_csv,
    _rotate,
    split,
    with_sensitive_feature,
)
from core.errors import CsvParseError, DatasetError
from services.storage_service import write_dataset_csv


def _tiny():
    return Dataset(
        features=[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]],
        labels=[0, 1, 1, 0, 1, 1],
        sensitive=[0, 0, 1, 1, 1, 1],
        n_y=2,
        n_z=2,
    )


def test_gen_synthetic_is_deterministic():
    a = gen_synthetic(500, seed=3)
    b = gen_synthetic(500, seed=3)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.sensitive, b.sensitive)


def test_gen_synthetic_shapes_and_alphabets():
    d = gen_synthetic(3000, seed=0)
    assert d.n == 3000
    assert d.k == 2
    assert d.feature_names == ("x1", "x2")
    assert set(np.unique(d.labels)) == {0, 1}
    assert set(np.unique(d.sensitive)) == {0, 1}
    # balanced labels, well inside 5 standard deviations
    assert abs(d.labels.mean() - 0.5) < 5 * np.sqrt(0.25 / 3000)


def test_gen_synthetic_single_row():
    d = gen_synthetic(1, seed=0)
    assert d.n == 1
    assert d.features.shape == (1, 2)


def test_gen_synthetic_rejects_empty():
    with pytest.raises(DatasetError):
        gen_synthetic(0, seed=0)


def test_gen_synthetic_sensitive_attribute_correlates_with_label():
    d = gen_synthetic(3000, seed=1)
    # the rotated density ratio pushes positives towards z=1
    assert d.sensitive[d.labels == 1].mean() > d.sensitive[d.labels == 0].mean()


def test_dataset_arrays_are_read_only():
    d = _tiny()
    with pytest.raises(ValueError):
        d.features[0, 0] = 10.0


def test_dataset_rejects_out_of_alphabet_labels():
    with pytest.raises(DatasetError):
        Dataset(features=[[0.0], [1.0]], labels=[0, 2], sensitive=[0, 0], n_y=2, n_z=1)


def test_dataset_rejects_mismatched_lengths():
    with pytest.raises(DatasetError):
        Dataset(features=[[0.0], [1.0]], labels=[0], sensitive=[0, 0], n_y=2, n_z=1)


def test_group_index_partitions_rows():
    d = gen_synthetic(400, seed=2)
    gi = build_group_index(d)
    assert gi.m == d.n
    all_rows = np.sort(np.concatenate([gi.rows(y, z) for y in range(2) for z in range(2)]))
    assert np.array_equal(all_rows, np.arange(d.n))
    for (y, z), rows in gi.cells.items():
        assert np.all(d.labels[rows] == y)
        assert np.all(d.sensitive[rows] == z)
        assert gi.count(y, z) == rows.size


def test_group_index_keeps_empty_cells():
    d = Dataset(features=[[0.0], [1.0]], labels=[0, 0], sensitive=[0, 1], n_y=2, n_z=2)
    gi = build_group_index(d)
    assert gi.count(1, 0) == 0
    assert gi.rows(1, 1).size == 0
    assert list(gi.label_counts) == [2, 0]


def test_describe_groups_has_totals():
    gi = build_group_index(_tiny())
    table = describe_groups(gi)
    assert table.loc["total", "total"] == 6
    assert table.loc["y=1", "z=1"] == 3


def test_split_sizes_and_disjointness():
    d = gen_synthetic(300, seed=0)
    train, test = split(d, SplitSpec(2 / 3, seed=5))
    assert train.n == 200
    assert test.n == 100
    rows = {tuple(r) for r in train.features} | {tuple(r) for r in test.features}
    assert len(rows) == 300


def test_split_full_fraction_leaves_empty_test():
    d = _tiny()
    train, test = split(d, SplitSpec(1.0, seed=0))
    assert train.n == d.n
    assert test.n == 0
    assert test.n_y == 2 and test.n_z == 2


def test_split_spec_rejects_bad_fraction():
    with pytest.raises(DatasetError):
        SplitSpec(0.0)


def test_cutting_balances_sensitive_groups():
    d = gen_synthetic(600, seed=4)
    cut = cutting(d, seed=1)
    counts = np.bincount(cut.sensitive, minlength=2)
    assert counts[0] == counts[1] == np.bincount(d.sensitive).min()


def test_cutting_requires_every_group():
    d = Dataset(features=[[0.0], [1.0]], labels=[0, 1], sensitive=[0, 0], n_y=2, n_z=2)
    with pytest.raises(DatasetError):
        cutting(d, seed=0)


def test_csv_round_trip_is_exact(tmp_path):
    d = gen_synthetic(200, seed=7)
    path = write_dataset_csv(d, tmp_path / "sintetico.csv")
    loaded = load_csv(path)
    assert np.array_equal(loaded.features, d.features)
    assert np.array_equal(loaded.labels, d.labels)
    assert np.array_equal(loaded.sensitive, d.sensitive)
    assert loaded.feature_names == ("x1", "x2")


def test_csv_header_layout(tmp_path):
    path = write_dataset_csv(gen_synthetic(10, seed=0), tmp_path / "d.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x1,x2,z,y"
    assert len(lines) == 11


def test_load_csv_reports_bad_cell(tmp_path):
    path = tmp_path / "ruim.csv"
    path.write_text("x1,x2,z,y\n1.0,2.0,0,1\n3.0,abc,1,0\n", encoding="utf-8")
    with pytest.raises(CsvParseError) as info:
        load_csv(path)
    assert info.value.row == 3
    assert info.value.column == "x2"


def test_load_csv_missing_sensitive_column(tmp_path):
    path = tmp_path / "sem_z.csv"
    path.write_text("x1,y\n1.0,1\n", encoding="utf-8")
    with pytest.raises(CsvParseError) as info:
        load_csv(path)
    assert info.value.column == "z"


def test_load_csv_custom_columns_and_multiclass(tmp_path):
    path = tmp_path / "multi.csv"
    path.write_text("a,grupo,classe\n0.5,0,0\n1.5,1,2\n2.5,2,1\n", encoding="utf-8")
    d = load_csv(path, label_column="classe", sensitive_column="grupo")
    assert d.n_y == 3
    assert d.n_z == 3
    assert d.feature_names == ("a",)


def test_load_csv_rejects_fractional_label(tmp_path):
    path = tmp_path / "frac.csv"
    path.write_text("x1,z,y\n1.0,0,0.5\n", encoding="utf-8")
    with pytest.raises(CsvParseError):
        load_csv(path)


def test_gen_synthetic_class_means():
    d = gen_synthetic(200_000, seed=3)
    for y, mean in SYNTHETIC_MEANS.items():
        np.testing.assert_allclose(d.features[d.labels == y].mean(axis=0), mean, atol=0.05)


def test_gen_synthetic_label_balance_within_three_sigma():
    n = 20_000
    d = gen_synthetic(n, seed=11)
    assert abs(d.labels.mean() - 0.5) <= 3 * np.sqrt(0.25 / n)


def test_rotation_multiplies_rows_on_the_right():
    points = np.array([[1.0, 0.0], [0.0, 1.0]])
    h = np.sqrt(0.5)
    np.testing.assert_allclose(_rotate(points, SYNTHETIC_ROTATION), [[h, -h], [h, h]])
    np.testing.assert_allclose(_rotate(points, -SYNTHETIC_ROTATION), [[h, h], [-h, h]])


def test_rotation_only_changes_the_sensitive_attribute():
    row_form = gen_synthetic(2000, seed=2)
    column_form = gen_synthetic(2000, seed=2, rotation=-SYNTHETIC_ROTATION)
    np.testing.assert_array_equal(row_form.features, column_form.features)
    np.testing.assert_array_equal(row_form.labels, column_form.labels)
    assert (row_form.sensitive != column_form.sensitive).any()


def test_split_uses_the_decimal_fraction():
    d = Dataset(features=np.zeros((90, 1)), labels=[0, 1] * 45, sensitive=[0] * 90, n_y=2, n_z=1)
    train, test = split(d, SplitSpec(0.7, seed=0))
    assert (train.n, test.n) == (63, 27)
    train, _ = split(gen_synthetic(3000, seed=0), SplitSpec(2 / 3, seed=0))
    assert train.n == 2000


def test_with_sensitive_feature_appends_indicators():
    d = Dataset(features=[[0.5], [1.5], [2.5]], labels=[0, 1, 1], sensitive=[0, 2, 1], n_y=2, n_z=3)
    wide = with_sensitive_feature(d)
    assert wide.feature_names == ("x1", "z=1", "z=2")
    np.testing.assert_array_equal(wide.features, [[0.5, 0.0, 0.0], [1.5, 0.0, 1.0], [2.5, 1.0, 0.0]])
    np.testing.assert_array_equal(wide.sensitive, d.sensitive)
    single = Dataset(features=[[1.0]], labels=[1], sensitive=[0], n_y=2, n_z=1)
    assert with_sensitive_feature(single).k == 1


def test_from_frame_infers_alphabets():
    frame = pd.DataFrame({"a": [0.1, 0.2, 0.3], "g": [0, 1, 1], "rotulo": [2, 0, 1]})
    d = Dataset.from_frame(frame, label_column="rotulo", sensitive_column="g")
    assert (d.n_y, d.n_z, d.feature_names) == (3, 2, ("a",))
