import numpy as np
import pytest

from fairmix.dataset import ColumnMeta, ModalityTable
from fairmix.errors import EmptyTableError, FitError, SelectionError, InputError
from fairmix.preprocess import (
    TemporalClip,
    apply_pca,
    drop_constant_and_null,
    fit_column_cleaner,
    fit_pca,
    fit_standardizer,
    select_level,
    summarize_temporal,
)


def table(X, levels=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    levels = levels or ["low"] * X.shape[1]
    return ModalityTable("m", X, tuple(ColumnMeta(f"f{j}", lv) for j, lv in enumerate(levels)))


class TestSummarizeTemporal:
    def test_hand_computed_descriptors(self):
        # series [1,2,3,4] at 1 fps: population std = sqrt(1.25), lag-1 Pearson
        # of [1,2,3] vs [2,3,4] is exactly 1
        out = summarize_temporal(TemporalClip("c", np.array([[1, 2, 3, 4]]).T, 1.0))
        np.testing.assert_allclose(
            out, [2.5, 2.5, np.sqrt(1.25), 1.0, 4.0, 1.0], atol=1e-12
        )

    def test_constant_series_autocorr_zero(self):
        out = summarize_temporal(TemporalClip("c", np.array([[5, 5, 5]]).T, 1.0))
        np.testing.assert_allclose(out, [5, 5, 0, 5, 5, 0], atol=0)

    def test_length_one_series(self):
        out = summarize_temporal(TemporalClip("c", np.array([[3.0]]), 30.0))
        np.testing.assert_allclose(out, [3, 3, 0, 3, 3, 0], atol=0)

    def test_output_length_is_six_per_feature(self):
        rng = np.random.default_rng(0)
        for nf in (1, 2, 7):
            clip = TemporalClip("c", rng.normal(size=(40, nf)), 10.0)
            assert summarize_temporal(clip).shape == (6 * nf,)

    def test_lag_exceeding_length_falls_back_to_zero(self):
        out = summarize_temporal(TemporalClip("c", np.array([[1, 2, 3]]).T, 30.0))
        assert out[5] == 0.0

    def test_empty_series_rejected(self):
        with pytest.raises(InputError):
            TemporalClip("c", np.empty((0, 1)), 1.0)


class TestDropConstantAndNull:
    def test_removes_constant_column(self):
        t = table([[1, 1], [1, 2], [1, 3]])
        out, removed = drop_constant_and_null(t)
        assert removed == ["f0"]
        assert out.feature_names == ("f1",)

    def test_removes_all_null_column(self):
        t = table([[np.nan, 1], [np.nan, 2]])
        out, removed = drop_constant_and_null(t)
        assert removed == ["f0"]

    def test_imputes_with_column_mean(self):
        t = table([[1], [np.nan], [3]])
        out, _ = drop_constant_and_null(t)
        np.testing.assert_array_equal(out.samples[:, 0], [1, 2, 3])

    def test_identity_when_nothing_to_remove(self):
        t = table([[1, 4], [2, 5], [3, 6]])
        out, removed = drop_constant_and_null(t)
        assert removed == []
        np.testing.assert_array_equal(out.samples, t.samples)

    def test_idempotent(self):
        t = table([[1, 1, np.nan], [1, 2, 5], [1, 3, np.nan]])
        once, _ = drop_constant_and_null(t)
        twice, removed2 = drop_constant_and_null(once)
        assert removed2 == []
        np.testing.assert_array_equal(once.samples, twice.samples)

    def test_all_columns_removed_errors(self):
        with pytest.raises(EmptyTableError):
            drop_constant_and_null(table([[1, np.nan], [1, np.nan]]))


class TestColumnCleaner:
    def test_train_statistics_apply_to_test(self):
        train = np.array([[1.0, 7.0], [3.0, 7.0]])  # second column constant
        cleaner = fit_column_cleaner(train)
        assert cleaner.keep == (0,)
        test = np.array([[np.nan, 9.0]])
        np.testing.assert_array_equal(cleaner.apply(test), [[2.0]])  # train mean


class TestSelectLevel:
    def test_selects_matching_columns(self):
        t = table(np.arange(15).reshape(3, 5), levels=["high", "low", "high", "low", "low"])
        out = select_level(t, "high")
        assert out.feature_names == ("f0", "f2")

    def test_no_match_errors(self):
        with pytest.raises(SelectionError, match="low"):
            select_level(table([[1], [2]], levels=["high"]), "low")

    def test_identity_when_all_match(self):
        t = table([[1, 2], [3, 4]], levels=["high", "high"])
        np.testing.assert_array_equal(select_level(t, "high").samples, t.samples)


class TestStandardizer:
    def test_hand_example(self):
        s = fit_standardizer(np.array([[0.0], [2.0]]))
        np.testing.assert_array_equal(s.apply([[1.0]]), [[0.0]])

    def test_constant_column_divide_by_one(self):
        s = fit_standardizer(np.array([[5.0], [5.0]]))
        np.testing.assert_array_equal(s.apply([[7.0]]), [[2.0]])

    def test_training_matrix_centered(self):
        rng = np.random.default_rng(1)
        X = rng.normal(3, 2, size=(50, 4))
        s = fit_standardizer(X)
        out = s.apply(X)
        np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=0), 1, atol=1e-12)


def pca_oracle(X, target):
    """Independent oracle: full eigendecomposition of the sample covariance."""
    Xc = X - X.mean(axis=0)
    C = np.cov(Xc, rowvar=False, ddof=1)
    evals, evecs = np.linalg.eig(np.atleast_2d(C))
    order = np.argsort(evals.real)[::-1]
    evals = np.clip(evals.real[order], 0, None)
    ratios = evals / evals.sum()
    k = 1
    while np.sum(ratios[:k]) < target - 1e-12:
        k += 1
    return k, ratios, evecs.real[:, order]


class TestPca:
    def test_rank_one_data(self):
        t = np.linspace(0, 1, 10)
        X = np.column_stack([t, t])  # all on the line y=x
        model = fit_pca(X, 0.80)
        assert model.n_components == 1
        np.testing.assert_allclose(model.explained_ratio, [1.0], atol=1e-12)

    def test_isotropic_gaussian_needs_both_components(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(500, 2))
        k_expected, _, _ = pca_oracle(X, 0.80)
        assert k_expected == 2  # each direction explains about half
        assert fit_pca(X, 0.80).n_components == 2

    def test_full_target_keeps_all_on_full_rank_data(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 5))
        assert fit_pca(X, 1.0).n_components == 5

    def test_orthonormal_components(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 6)) @ np.diag([5, 3, 2, 1, 1, 0.5])
        model = fit_pca(X, 0.9)
        gram = model.components @ model.components.T
        np.testing.assert_allclose(gram, np.eye(model.n_components), atol=1e-8)

    def test_matches_oracle_up_to_sign(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n, d = int(rng.integers(5, 40)), int(rng.integers(2, 10))
            X = rng.normal(size=(n, d)) * rng.uniform(0.1, 5, size=d)
            model = fit_pca(X, 0.80)
            k, ratios, evecs = pca_oracle(X, 0.80)
            assert model.n_components == k
            np.testing.assert_allclose(model.explained_ratio, ratios[:k], atol=1e-9)
            for i in range(k):
                dot = abs(model.components[i] @ evecs[:, i])
                np.testing.assert_allclose(dot, 1.0, atol=1e-6)

    def test_projection_variance_matches_reported_ratio(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(60, 8)) * np.arange(1, 9)
        model = fit_pca(X, 0.80)
        proj = apply_pca(model, X)
        total = np.var(X - X.mean(axis=0), axis=0, ddof=1).sum()
        kept = np.var(proj, axis=0, ddof=1).sum()
        np.testing.assert_allclose(kept / total, model.explained_ratio.sum(), atol=1e-8)

    def test_single_row_rejected(self):
        with pytest.raises(FitError):
            fit_pca(np.array([[1.0, 2.0]]))

    def test_deterministic_sign_convention(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(25, 4))
        a, b = fit_pca(X, 0.9), fit_pca(X.copy(), 0.9)
        np.testing.assert_array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0
