import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wlda.dataset import (
    CSVParseError,
    DatasetError,
    MaskedDataset,
    MissingSpec,
    feature_missing_rates,
    load_csv,
    simulate_mcar,
    stratified_split,
    write_csv,
    write_mask_csv,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCSV:
    def test_fully_observed(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
        assert d.mask.all()
        assert d.feature_names == ("a", "b")
        assert d.labels is None

    def test_empty_cell_is_missing(self, tmp_path):
        d = load_csv(write(tmp_path, "sepal,petal_width\n1,2\n3,\n5,6\n"))
        assert not d.mask[1, 1]
        assert d.mask.sum() == 5
        assert np.isnan(d.values[1, 1])

    def test_custom_token_and_na_flag(self, tmp_path):
        path = write(tmp_path, "a,b\n?,2\nNA,na\n")
        d = load_csv(path, missing_token="?", accept_na=True)
        np.testing.assert_array_equal(d.mask, [[False, True], [False, False]])
        with pytest.raises(CSVParseError):
            load_csv(path, missing_token="?")

    def test_labels_first_appearance(self, tmp_path):
        d = load_csv(write(tmp_path, "x,y\n1,b\n2,a\n3,b\n4,c\n"), label_column="y")
        np.testing.assert_array_equal(d.labels, [1, 2, 1, 3])
        assert d.class_names == ("b", "a", "c")

    def test_parse_error_names_cell(self, tmp_path):
        with pytest.raises(CSVParseError) as err:
            load_csv(write(tmp_path, "a,b\n1,2\n3,oops\n"))
        assert err.value.row == 2 and err.value.column == "b"

    def test_missing_label_column(self, tmp_path):
        with pytest.raises(DatasetError, match="label column"):
            load_csv(write(tmp_path, "a,b\n1,2\n"), label_column="y")

    def test_fully_missing_unlabelled_row_accepted(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n,\n1,2\n"))
        assert not d.mask[0].any()

    def test_iris_shape(self, iris):
        assert (iris.n, iris.p, iris.n_classes) == (150, 4, 3)
        np.testing.assert_array_equal(iris.class_counts(), [50, 50, 50])

    def test_round_trip(self, tmp_path, iris, rng):
        masked = simulate_mcar(iris, MissingSpec(0.4, seed=3))
        path = tmp_path / "rt.csv"
        write_csv(masked, path, label_column="species")
        back = load_csv(path, label_column="species")
        np.testing.assert_array_equal(back.mask, masked.mask)
        np.testing.assert_array_equal(back.values[back.mask], masked.values[masked.mask])
        np.testing.assert_array_equal(back.labels, masked.labels)
        assert back.class_names == masked.class_names

    def test_mask_csv(self, tmp_path):
        path = tmp_path / "m.csv"
        write_mask_csv(np.array([[1, 0], [1, 1]], dtype=bool), path, ["a", "b"])
        assert path.read_text() == "a,b\n1,0\n1,1\n"


class TestMaskedDataset:
    def test_duplicate_names_rejected(self):
        with pytest.raises(DatasetError, match="duplicates"):
            MaskedDataset(np.zeros((2, 2)), np.ones((2, 2)), None, ("a", "a"))

    def test_single_class_rejected(self):
        with pytest.raises(DatasetError):
            MaskedDataset(np.zeros((2, 2)), np.ones((2, 2)), [1, 1])

    def test_non_finite_observed_rejected(self):
        with pytest.raises(DatasetError):
            MaskedDataset(np.array([[np.inf]]), np.ones((1, 1)))

    def test_immutable(self, iris):
        with pytest.raises(ValueError):
            iris.values[0, 0] = 1.0


class TestSimulateMCAR:
    def test_rate_zero_identity(self, iris):
        out = simulate_mcar(iris, MissingSpec(0.0, seed=1))
        np.testing.assert_array_equal(out.mask, iris.mask)

    def test_exact_deletion_count(self, iris):
        out = simulate_mcar(iris, MissingSpec(0.30, seed=5))
        # pool is 149 rows x 3 features
        assert (~out.mask).sum() == int(np.floor(0.30 * 149 * 3)) == 134
        assert out.mask[0].all() and out.mask[:, 0].all()

    def test_deterministic(self, iris):
        a = simulate_mcar(iris, MissingSpec(0.5, seed=9))
        b = simulate_mcar(iris, MissingSpec(0.5, seed=9))
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_unprotected_pool(self, iris):
        out = simulate_mcar(iris, MissingSpec(0.5, False, False, seed=2))
        assert (~out.mask).sum() == 300

    def test_invalid_specs(self):
        with pytest.raises(DatasetError):
            MissingSpec(1.0)
        tiny = MaskedDataset(np.ones((1, 1)), np.ones((1, 1)))
        with pytest.raises(DatasetError, match="eligible"):
            simulate_mcar(tiny, MissingSpec(0.5))

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(2, 30),
        p=st.integers(2, 6),
        rate=st.floats(0, 0.99),
        seed=st.integers(0, 2**32 - 1),
        protect_row=st.booleans(),
        protect_feature=st.booleans(),
    )
    def test_protection_and_count(self, n, p, rate, seed, protect_row, protect_feature):
        data = MaskedDataset(np.zeros((n, p)), np.ones((n, p)))
        out = simulate_mcar(data, MissingSpec(rate, protect_row, protect_feature, seed))
        pool = (n - protect_row) * (p - protect_feature)
        assert (~out.mask).sum() == int(np.floor(rate * pool))
        if protect_row:
            assert out.mask[0].all()
        if protect_feature:
            assert out.mask[:, 0].all()


class TestStratifiedSplit:
    def test_iris_counts(self, iris):
        train, test = stratified_split(iris, 0.2, seed=0)
        np.testing.assert_array_equal(test.class_counts(), [10, 10, 10])
        np.testing.assert_array_equal(train.class_counts(), [40, 40, 40])

    def test_small_class_gets_one_test_sample(self):
        labels = np.array([1] * 20 + [2] * 3)
        data = MaskedDataset(np.arange(23.0)[:, None], np.ones((23, 1)), labels)
        train, test = stratified_split(data, 0.1, seed=1)
        # 0.1 * 3 rounds to 0; clamped up to 1
        np.testing.assert_array_equal(test.class_counts(), [2, 1])
        for g, n_g in zip((1, 2), (20, 3)):
            assert abs(test.class_counts()[g - 1] - 0.1 * n_g) <= 1

    def test_partition_and_determinism(self, iris):
        tr1, te1 = stratified_split(iris, 0.3, seed=4)
        tr2, te2 = stratified_split(iris, 0.3, seed=4)
        np.testing.assert_array_equal(te1.values, te2.values)
        rows = np.vstack([tr1.values, te1.values])
        assert rows.shape[0] == 150
        assert len({tuple(r) + (l,) for r, l in zip(rows, np.concatenate([tr1.labels, te1.labels]))}) == len(
            {tuple(r) + (l,) for r, l in zip(iris.values, iris.labels)}
        )

    def test_singleton_class_errors(self):
        data = MaskedDataset(np.zeros((3, 1)), np.ones((3, 1)), [1, 1, 2])
        with pytest.raises(DatasetError, match="at least 2"):
            stratified_split(data, 0.5, seed=0)


class TestFeatureMissingRates:
    def test_all_observed(self):
        np.testing.assert_array_equal(feature_missing_rates(np.ones((5, 3), bool)), [0, 0, 0])

    def test_direct_count(self):
        m = np.array([[1], [0], [1], [0]], bool)
        assert feature_missing_rates(m)[0] == 0.5

    def test_pooled_over_masks(self):
        train = np.ones((10, 3), bool)
        train[:3, 1] = False
        test = np.ones((10, 3), bool)
        test[0, 1] = False
        np.testing.assert_allclose(feature_missing_rates(train, test), [0, 0.2, 0])

    def test_empty(self):
        with pytest.raises(DatasetError):
            feature_missing_rates()
