"""Marginal and conditional predictive values via cross-validated forests."""

import numpy as np
import pytest

from varimp.data import from_arrays
from varimp.errors import ValidationError, ZeroVarianceError
from varimp.predvalue import (ForestConfig, PredValueReport, cv_errors,
                              fit_forest, fold_assignment, mpv_cpv,
                              predvalue_csv, score_consistency)
from varimp.simbench import gen_predictors, gen_response, make_dataset
from varimp.tree import TreeConfig, grow


def _ds(cols, roles, y, names=None):
    if names is None:
        names = [f"x{i + 1}" for i in range(len(cols))]
    return from_arrays(names, cols, roles, np.asarray(y, dtype=float))


SMALL_FOREST = ForestConfig(n_trees=10, max_depth=3, seed=0)


class TestForestConfig:
    def test_defaults(self):
        cfg = ForestConfig()
        assert cfg.n_trees == 100
        assert cfg.bootstrap is True
        assert cfg.max_depth == 6

    def test_n_trees_validation(self):
        with pytest.raises(ValidationError):
            ForestConfig(n_trees=0)


class TestFitForest:
    def test_constant_response_predicts_constant(self):
        rng = np.random.default_rng(0)
        ds = _ds([rng.standard_normal(40)], ["n"], np.full(40, 2.5))
        forest = fit_forest(ds, SMALL_FOREST)
        assert np.allclose(forest.predict(ds.X), 2.5)

    def test_single_tree_no_bootstrap_equals_plain_tree(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(100)
        y = np.where(x > 0, 3.0, 0.0) + 0.1 * rng.standard_normal(100)
        ds = _ds([x], ["n"], y)
        cfg = ForestConfig(n_trees=1, bootstrap=False, max_depth=4, seed=7)
        forest = fit_forest(ds, cfg)
        tree = grow(ds, TreeConfig(split_levels=4))
        assert np.array_equal(forest.predict(ds.X), tree.predict(ds.X))

    def test_in_sample_mse_beats_variance(self):
        rng = np.random.default_rng(2)
        pred = gen_predictors(400, rng)
        y = gen_response("E1", pred, rng)
        ds = make_dataset(pred, y)
        forest = fit_forest(ds, ForestConfig(n_trees=20, seed=3))
        mse = float(((ds.y - forest.predict(ds.X)) ** 2).mean())
        assert mse <= float(ds.y.var())

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(60)
        ds = _ds([x], ["n"], x + rng.standard_normal(60))
        a = fit_forest(ds, SMALL_FOREST).predict(ds.X)
        b = fit_forest(ds, SMALL_FOREST).predict(ds.X)
        assert np.array_equal(a, b)
        c = fit_forest(ds, SMALL_FOREST, stream_path=(9,)).predict(ds.X)
        assert not np.array_equal(a, c)


class TestFoldAssignment:
    def test_balanced_and_complete(self):
        fold_of = fold_assignment(25, 10, seed=0)
        counts = np.bincount(fold_of, minlength=10)
        assert counts.sum() == 25
        assert counts.max() - counts.min() <= 1
        assert set(fold_of.tolist()) == set(range(10))

    def test_deterministic(self):
        assert np.array_equal(fold_assignment(40, 5, seed=1),
                              fold_assignment(40, 5, seed=1))
        assert not np.array_equal(fold_assignment(40, 5, seed=1),
                                  fold_assignment(40, 5, seed=2))

    def test_validation(self):
        with pytest.raises(ValidationError):
            fold_assignment(5, 1, seed=0)
        with pytest.raises(ValidationError):
            fold_assignment(5, 6, seed=0)


class TestCvErrors:
    def test_s0_loo_two_point_example(self):
        ds = _ds([[0.0, 1.0]], ["n"], [0.0, 2.0])
        assert cv_errors(ds, "none", SMALL_FOREST, cv="loo") == \
            pytest.approx(4.0)

    def test_s0_kfold_manual(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(30)
        ds = _ds([rng.standard_normal(30)], ["n"], y)
        got = cv_errors(ds, "none", SMALL_FOREST, cv="kfold", n_folds=5)
        fold_of = fold_assignment(30, 5, SMALL_FOREST.seed)
        total = 0.0
        for f in range(5):
            test = fold_of == f
            total += float(((y[test] - y[~test].mean()) ** 2).sum())
        assert got == pytest.approx(total / 30)

    def test_all_scope_constant_y_is_zero(self):
        rng = np.random.default_rng(5)
        ds = _ds([rng.standard_normal(40), rng.standard_normal(40)],
                 ["n", "n"], np.full(40, 1.0))
        got = cv_errors(ds, "all", SMALL_FOREST, cv="kfold", n_folds=4)
        assert got == pytest.approx(0.0, abs=1e-24)

    def test_scope_j_requires_index(self):
        rng = np.random.default_rng(6)
        ds = _ds([rng.standard_normal(20), rng.standard_normal(20)],
                 ["n", "n"], rng.standard_normal(20))
        with pytest.raises(ValidationError):
            cv_errors(ds, "only_j", SMALL_FOREST)
        with pytest.raises(ValidationError):
            cv_errors(ds, "bogus", SMALL_FOREST, j=0)
        with pytest.raises(ValidationError):
            cv_errors(ds, "all", SMALL_FOREST, cv="holdout")

    def test_loo_completes_on_thirty_rows(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(30)
        ds = _ds([x, rng.standard_normal(30)], ["n", "n"],
                 2.0 * x + 0.2 * rng.standard_normal(30))
        cfg = ForestConfig(n_trees=3, max_depth=2, seed=1)
        s_all = cv_errors(ds, "all", cfg, cv="loo")
        s0 = cv_errors(ds, "none", cfg, cv="loo")
        assert np.isfinite(s_all) and np.isfinite(s0)
        assert s_all < s0  # strong signal must beat the mean-only model


class TestMpvCpv:
    def test_requires_two_predictors(self):
        ds = _ds([[1.0, 2.0, 3.0]], ["n"], [1.0, 2.0, 3.0])
        with pytest.raises(ValidationError):
            mpv_cpv(ds, SMALL_FOREST)

    def test_report_shape_and_identities(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(80)
        ds = _ds([x, rng.standard_normal(80)], ["n", "n"],
                 2.0 * x + rng.standard_normal(80))
        rep = mpv_cpv(ds, SMALL_FOREST, cv="kfold", n_folds=5)
        assert isinstance(rep, PredValueReport)
        assert rep.scheme == "kfold:5"
        assert rep.S0 >= 0 and rep.S >= 0
        assert (rep.S_j >= 0).all() and (rep.S_minus_j >= 0).all()
        assert np.allclose(rep.mpv, rep.S0 - rep.S_j)
        assert np.allclose(rep.cpv, rep.S_minus_j - rep.S)
        assert np.isfinite(rep.mpv).all() and np.isfinite(rep.cpv).all()

    def test_duplicated_predictor_cpv_collapses(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(200)
        y = 3.0 * x + 0.3 * rng.standard_normal(200)
        ds = _ds([x, x.copy(), rng.standard_normal(200)], ["n", "n", "n"], y)
        rep = mpv_cpv(ds, ForestConfig(n_trees=15, max_depth=4, seed=2),
                      cv="kfold", n_folds=5)
        var_y = float(np.var(y))
        for j in (0, 1):
            assert rep.mpv[j] > 0.5 * var_y
            assert abs(rep.cpv[j]) < 0.05 * var_y

    def test_signal_beats_null_on_mpv(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(150)
        ds = _ds([x, rng.standard_normal(150)], ["n", "n"],
                 2.0 * x + 0.5 * rng.standard_normal(150))
        rep = mpv_cpv(ds, ForestConfig(n_trees=15, max_depth=4, seed=3),
                      cv="kfold", n_folds=5)
        assert rep.mpv[0] > rep.mpv[1]

    def test_noise_predictor_mpv_near_zero(self):
        rng = np.random.default_rng(11)
        n = 400
        x1 = rng.standard_normal(n)
        x2 = rng.standard_normal(n)
        noise = rng.standard_normal(n)
        y = x1 + 0.5 * x2 + rng.standard_normal(n)
        ds = _ds([x1, x2, noise], ["n", "n", "n"], y)
        rep = mpv_cpv(ds, ForestConfig(n_trees=15, max_depth=4, seed=4),
                      cv="kfold", n_folds=10)
        assert abs(rep.mpv[2]) < 0.05 * float(np.var(y))

    def test_level_relabel_invariance(self):
        rng = np.random.default_rng(12)
        n = 120
        g = np.array(list("abcd"))[rng.integers(0, 4, size=n)]
        x = rng.standard_normal(n)
        y = (g == "b") * 2.0 + rng.standard_normal(n)
        relabel = {"a": "w", "b": "z", "c": "k", "d": "a"}
        ds1 = _ds([g, x], ["c", "n"], y, names=["g", "x"])
        ds2 = _ds([[relabel[v] for v in g], x], ["c", "n"], y,
                  names=["g", "x"])
        cfg = ForestConfig(n_trees=8, max_depth=3, seed=5)
        a = mpv_cpv(ds1, cfg, cv="kfold", n_folds=4)
        b = mpv_cpv(ds2, cfg, cv="kfold", n_folds=4)
        assert np.array_equal(a.mpv, b.mpv)
        assert np.array_equal(a.cpv, b.cpv)

    def test_reproducible_for_fixed_seed(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(60)
        ds = _ds([x, rng.standard_normal(60)], ["n", "n"],
                 x + rng.standard_normal(60))
        a = mpv_cpv(ds, SMALL_FOREST, cv="kfold", n_folds=4)
        b = mpv_cpv(ds, SMALL_FOREST, cv="kfold", n_folds=4)
        assert np.array_equal(a.mpv, b.mpv)
        assert np.array_equal(a.cpv, b.cpv)
        assert a.S0 == b.S0 and a.S == b.S


class TestScoreConsistency:
    def _report(self):
        mpv = np.array([3.0, 2.0, 1.0, 0.5])
        cpv = np.array([2.5, 2.0, 0.8, 0.1])
        return PredValueReport(names=("a", "b", "c", "d"), S0=4.0, S=1.0,
                               S_j=4.0 - mpv, S_minus_j=1.0 + cpv,
                               mpv=mpv, cpv=cpv, scheme="kfold:10", seed=0)

    def test_proportional_scores_correlate_perfectly(self):
        rep = self._report()
        cor_mpv, cor_cpv = score_consistency(2.0 * rep.mpv, rep)
        assert cor_mpv == pytest.approx(1.0)
        assert -1.0 <= cor_cpv <= 1.0

    def test_anti_ordered_scores_negative(self):
        rep = self._report()
        cor_mpv, _ = score_consistency(-rep.mpv, rep)
        assert cor_mpv == pytest.approx(-1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            score_consistency([1.0, 2.0], self._report())

    def test_constant_scores_rejected(self):
        with pytest.raises(ZeroVarianceError):
            score_consistency([1.0, 1.0, 1.0, 1.0], self._report())


class TestFactorialDesign:
    def test_additive_factorial_mpv_cpv_agree(self):
        # balanced factorial with additive effects: marginal and
        # conditional predictive values should line up almost perfectly
        rng = np.random.default_rng(14)
        levels = [(a, b, c) for a in range(3) for b in range(2)
                  for c in range(4)]
        reps = 12
        rows = np.array(levels * reps, dtype=float)
        effects_a = np.array([0.0, 1.0, 2.0])
        effects_b = np.array([0.0, 1.5])
        effects_c = np.array([0.0, 0.5, 1.0, 1.5])
        y = (effects_a[rows[:, 0].astype(int)]
             + effects_b[rows[:, 1].astype(int)]
             + effects_c[rows[:, 2].astype(int)]
             + 0.5 * rng.standard_normal(rows.shape[0]))
        ds = _ds([rows[:, 0], rows[:, 1], rows[:, 2]], ["n", "n", "n"], y)
        rep = mpv_cpv(ds, ForestConfig(n_trees=20, max_depth=4, seed=6),
                      cv="kfold", n_folds=10)
        from varimp.stats import pearson_corr
        assert pearson_corr(rep.mpv, rep.cpv) > 0.95


class TestPredvalueCsv:
    def test_format(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal(50)
        ds = _ds([x, rng.standard_normal(50)], ["n", "n"],
                 x + rng.standard_normal(50))
        rep = mpv_cpv(ds, SMALL_FOREST, cv="kfold", n_folds=5)
        text = predvalue_csv(rep)
        lines = text.strip().split("\n")
        assert lines[0].startswith("# S0=")
        assert "scheme=kfold:5" in lines[0]
        assert lines[1] == "variable,S_j,S_minus_j,MPV,CPV"
        assert len(lines) == 2 + 2
        row = lines[2].split(",")
        assert row[0] == "x1"
        assert float(row[3]) == rep.mpv[0]
        assert float(row[4]) == rep.cpv[0]
