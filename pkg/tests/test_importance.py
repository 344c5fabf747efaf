"""Raw scores, permutation bias adjustment, and the threshold stage."""

import json
import math

import numpy as np
import pytest

from varimp import _kernels
from varimp.data import from_arrays, permute_response
from varimp.errors import ValidationError
from varimp.importance import (ImportanceReport, bias_adjusted,
                               exact_threshold_oracle, raw_scores, report_csv,
                               report_json, score, threshold)
from varimp.parallel import STREAM_PERMUTE, derive
from varimp.stats import chisq1_quantile
from varimp.tree import TreeConfig, grow


def _signal_ds(seed=0, n=150, K=3):
    rng = np.random.default_rng(seed)
    cols = [rng.standard_normal(n) for _ in range(K)]
    y = 1.5 * (cols[0] > 0) + rng.standard_normal(n)
    return from_arrays([f"x{i + 1}" for i in range(K)], cols, ["n"] * K, y)


class TestRawScores:
    def test_leaf_only_tree_scores_zero(self):
        ds = _signal_ds(n=6)
        tree = grow(ds, TreeConfig(min_node_to_split=8))
        assert tree.root.is_leaf
        assert raw_scores(tree).tolist() == [0.0, 0.0, 0.0]

    def test_single_split_p_half(self):
        p1 = np.array([[0.5]])
        logp1 = np.array([[math.log(0.5)]])
        v = _kernels.raw_scores_from_tree(p1, logp1,
                                          np.array([400], dtype=np.intp),
                                          np.array([0], dtype=np.intp), 1)
        assert float(np.asarray(v)[0]) == pytest.approx(9.0987, abs=1e-3)

    def test_single_split_p_one_is_zero(self):
        p1 = np.array([[1.0]])
        logp1 = np.array([[0.0]])
        v = _kernels.raw_scores_from_tree(p1, logp1,
                                          np.array([400], dtype=np.intp),
                                          np.array([0], dtype=np.intp), 1)
        assert float(np.asarray(v)[0]) == 0.0

    def test_matches_per_node_recomputation(self):
        ds = _signal_ds(1, n=300)
        tree = grow(ds)
        expected = np.zeros(3)
        for node in tree.intermediate_nodes:
            for k in range(3):
                expected[k] += math.sqrt(node.n_t) * chisq1_quantile(
                    float(node.tests.p1[k]), float(node.tests.log_p1[k]))
        assert np.allclose(raw_scores(tree), expected, rtol=1e-12)

    def test_k_mismatch_rejected(self):
        tree = grow(_signal_ds(2))
        with pytest.raises(ValidationError):
            raw_scores(tree, K=5)


class TestBiasAdjusted:
    def test_b_below_one_rejected(self):
        with pytest.raises(ValidationError):
            bias_adjusted(_signal_ds(), B=0)

    def test_vi_is_ratio(self):
        rep = bias_adjusted(_signal_ds(3), B=10, seed=4)
        mask = rep.v_bar > 0
        assert mask.any()
        assert np.allclose(rep.vi[mask], rep.v[mask] / rep.v_bar[mask])

    def test_b_one_manual_recompute(self):
        ds = _signal_ds(5, n=120)
        rep = bias_adjusted(ds, B=1, seed=11)
        rng = np.random.default_rng(derive(11, STREAM_PERMUTE, 0))
        perm_tree = grow(ds.with_response(ds.y[rng.permutation(ds.n_rows)]))
        v_b = raw_scores(perm_tree)
        assert np.array_equal(rep.v_bar, v_b)
        assert rep.perm_max[0] == v_b.max()
        assert np.array_equal(rep.v, raw_scores(grow(ds)))
        safe = np.where(v_b > 0, v_b, 1.0)
        assert np.array_equal(rep.vi, np.where(v_b > 0, rep.v / safe, 0.0))

    def test_b_three_mean_and_max_recompute(self):
        ds = _signal_ds(6, n=100)
        rep = bias_adjusted(ds, B=3, seed=21)
        per_b = []
        for b in range(3):
            rng = np.random.default_rng(derive(21, STREAM_PERMUTE, b))
            tree = grow(ds.with_response(ds.y[rng.permutation(ds.n_rows)]))
            per_b.append(raw_scores(tree))
        per_b = np.vstack(per_b)
        assert np.allclose(rep.v_bar, per_b.mean(axis=0), rtol=1e-15)
        assert np.array_equal(rep.perm_max, per_b.max(axis=1))

    def test_constant_response_guard(self):
        n = 40
        ds = from_arrays(["x1", "x2"],
                         [np.arange(float(n)), np.arange(float(n)) % 5],
                         ["n", "n"], np.full(n, 3.0))
        rep = bias_adjusted(ds, B=5)
        assert np.array_equal(rep.v, np.zeros(2))
        assert np.array_equal(rep.v_bar, np.zeros(2))
        assert np.array_equal(rep.vi, np.zeros(2))

    def test_deterministic_across_runs_and_threads(self):
        ds = _signal_ds(7)
        a = bias_adjusted(ds, B=8, seed=2, threads=1)
        b = bias_adjusted(ds, B=8, seed=2, threads=2)
        c = bias_adjusted(ds, B=8, seed=2, threads=1)
        for x, y in ((a, b), (a, c)):
            assert np.array_equal(x.v, y.v)
            assert np.array_equal(x.v_bar, y.v_bar)
            assert np.array_equal(x.vi, y.vi)
            assert np.array_equal(x.perm_max, y.perm_max)

    def test_scale_equivariance(self):
        ds = _signal_ds(8)
        scaled = ds.with_response(ds.y * 3.0)
        a = bias_adjusted(ds, B=6, seed=1)
        b = bias_adjusted(scaled, B=6, seed=1)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.v_bar, b.v_bar)
        assert np.array_equal(a.vi, b.vi)

    def test_level_relabel_invariance(self):
        rng = np.random.default_rng(9)
        n = 150
        g = np.array(list("abcd"))[rng.integers(0, 4, size=n)]
        x = rng.standard_normal(n)
        y = (g == "c") * 2.0 + rng.standard_normal(n)
        ds1 = from_arrays(["g", "x"], [g, x], ["c", "n"], y)
        relabel = {"a": "q4", "b": "q3", "c": "q2", "d": "q1"}
        ds2 = from_arrays(["g", "x"], [[relabel[v] for v in g], x],
                          ["c", "n"], y)
        a = bias_adjusted(ds1, B=6, seed=3)
        b = bias_adjusted(ds2, B=6, seed=3)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.vi, b.vi)


def _fake_report(v, vi, perm_max, names=None):
    v = np.asarray(v, dtype=float)
    vi = np.asarray(vi, dtype=float)
    if names is None:
        names = tuple(f"x{i + 1}" for i in range(len(v)))
    return ImportanceReport(names=names, v=v, v_bar=v / np.maximum(vi, 1e-12),
                            vi=vi, perm_max=np.asarray(perm_max, dtype=float),
                            B=len(perm_max), seed=0)


def _perm_max_with_95th(value):
    # twenty values whose 19th order statistic is exactly `value`
    low = np.linspace(0.1, value - 0.5, 18)
    return np.concatenate([low, [value, value + 100.0]])


class TestThreshold:
    def test_hand_walk(self):
        rep = _fake_report([10.0, 5.0, 1.0], [3.0, 2.0, 1.0],
                           _perm_max_with_95th(6.0))
        out = threshold(rep, 0.05)
        assert out.v_star == 6.0
        assert out.m == 1
        assert out.v_tilde == pytest.approx(2.5)
        assert np.allclose(out.normalized, [1.2, 0.8, 0.4])
        assert out.important.tolist() == [True, False, False]
        assert out.note == ""
        # flagged exactly when normalized exceeds 1
        assert np.array_equal(out.important, out.normalized > 1.0)

    def test_m_zero_reports_unnormalized(self):
        rep = _fake_report([1.0, 2.0], [1.1, 0.9], _perm_max_with_95th(6.0))
        out = threshold(rep, 0.05)
        assert out.m == 0
        assert out.v_tilde is None
        assert not out.important.any()
        assert np.array_equal(out.normalized, rep.vi)
        assert "m = 0" in out.note

    def test_m_equals_k(self):
        rep = _fake_report([10.0, 9.0], [4.0, 3.0], _perm_max_with_95th(6.0))
        out = threshold(rep, 0.05)
        assert out.m == 2
        assert out.v_tilde == pytest.approx(3.0)
        assert out.important.all()
        assert out.normalized.min() == pytest.approx(1.0)

    def test_tie_at_v_star_not_counted(self):
        rep = _fake_report([6.0, 5.0], [2.0, 1.0], _perm_max_with_95th(6.0))
        out = threshold(rep, 0.05)
        assert out.m == 0

    def test_vi_tie_flags_smaller_index(self):
        rep = _fake_report([10.0, 11.0, 5.0], [2.0, 3.0, 2.0],
                           _perm_max_with_95th(6.0))
        out = threshold(rep, 0.05)
        assert out.m == 2
        assert out.important.tolist() == [True, True, False]

    def test_alpha_domain(self):
        rep = _fake_report([1.0], [1.0], _perm_max_with_95th(6.0))
        for alpha in (0.0, 1.0, -0.2, 2.0):
            with pytest.raises(ValidationError):
                threshold(rep, alpha)

    def test_empty_perm_max_rejected(self):
        rep = _fake_report([1.0], [1.0], [])
        with pytest.raises(ValidationError):
            threshold(rep, 0.05)

    def test_score_composes_stages(self):
        ds = _signal_ds(10)
        direct = score(ds, B=6, alpha=0.1, seed=5)
        manual = threshold(bias_adjusted(ds, B=6, seed=5), 0.1)
        assert np.array_equal(direct.vi, manual.vi)
        assert direct.v_star == manual.v_star
        assert direct.m == manual.m
        assert np.array_equal(direct.important, manual.important)


class TestExactThresholdOracle:
    def test_j_outer_one_is_single_max(self):
        ds = _signal_ds(12, n=80)
        cfg = TreeConfig()
        got = exact_threshold_oracle(ds, cfg, 0.05, J_outer=1, B_inner=4,
                                     seed=9)
        rng = np.random.default_rng(derive(9, 3, 0, 0))
        ds_perm = permute_response(ds, rng)
        rep = bias_adjusted(ds_perm, cfg, B=4, seed=derive(9, 3, 0, 1))
        assert got == rep.vi.max()

    def test_deterministic(self):
        ds = _signal_ds(13, n=60)
        cfg = TreeConfig()
        a = exact_threshold_oracle(ds, cfg, 0.1, J_outer=3, B_inner=3, seed=1)
        b = exact_threshold_oracle(ds, cfg, 0.1, J_outer=3, B_inner=3, seed=1)
        assert a == b

    def test_j_outer_validation(self):
        with pytest.raises(ValidationError):
            exact_threshold_oracle(_signal_ds(), TreeConfig(), 0.05,
                                   J_outer=0, B_inner=2)

    def test_flag_rate_tracks_oracle_on_null_toys(self):
        # the one-level permutation rule should flag null datasets at about
        # the same rate as the double-permutation construction it stands for
        cfg = TreeConfig()
        n, K, n_toys = 100, 3, 80
        approx_flags = 0
        oracle_flags = 0
        for i in range(n_toys):
            rng = np.random.default_rng(1000 + i)
            cols = [rng.standard_normal(n) for _ in range(K)]
            ds = from_arrays([f"x{j}" for j in range(K)], cols, ["n"] * K,
                             rng.standard_normal(n))
            rep = threshold(bias_adjusted(ds, cfg, B=40, seed=i), 0.05)
            approx_flags += rep.m >= 1
            u_star = exact_threshold_oracle(ds, cfg, 0.05, J_outer=40,
                                            B_inner=40, seed=i)
            oracle_flags += rep.vi.max() > u_star
        assert abs(approx_flags - oracle_flags) / n_toys <= 0.05


class TestSerialization:
    def _scored(self):
        return score(_signal_ds(14), B=8, alpha=0.1, seed=7)

    def test_csv_shape_and_round_trip(self):
        rep = self._scored()
        text = report_csv(rep)
        lines = text.strip().split("\n")
        assert lines[0] == "name,v,v_bar,VI,normalized,important"
        assert len(lines) == 1 + len(rep.names)
        for k, line in enumerate(lines[1:]):
            cells = line.split(",")
            assert cells[0] == rep.names[k]
            assert float(cells[1]) == rep.v[k]
            assert float(cells[3]) == rep.vi[k]
            assert cells[5] in ("true", "false")

    def test_unthresholded_report_rejected(self):
        rep = bias_adjusted(_signal_ds(15), B=4)
        with pytest.raises(ValidationError):
            report_csv(rep)
        with pytest.raises(ValidationError):
            report_json(rep)

    def test_json_fields(self):
        rep = self._scored()
        doc = json.loads(report_json(rep))
        assert set(doc) == {"B", "alpha", "v_star", "m", "v_tilde", "seed",
                            "note", "perm_max", "variables"}
        assert doc["B"] == 8
        assert len(doc["perm_max"]) == 8
        assert len(doc["variables"]) == len(rep.names)
        assert doc["variables"][0].keys() == {
            "name", "v", "v_bar", "VI", "normalized", "important"}
        assert doc["m"] == rep.m

    def test_json_seed_forms(self):
        rep = self._scored()
        doc = json.loads(report_json(rep))
        assert doc["seed"] == 7
        seq = derive(3, 1, 2)
        rep2 = threshold(bias_adjusted(_signal_ds(16), B=3, seed=seq), 0.1)
        doc2 = json.loads(report_json(rep2))
        assert doc2["seed"]["spawn_key"] == [1, 2]
